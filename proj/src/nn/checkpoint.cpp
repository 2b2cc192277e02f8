#include "tween/nn/checkpoint.hpp"

#include <fstream>

#include "tween/util/binary_io.hpp"

namespace tween::nn {

namespace {

using util::read_le;
using util::write_le;

void write_blob(std::ostream& out, const std::string& name, const Matrix<float>& m) {
  util::write_string(out, name);
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.rows()));
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.cols()));
  out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(float)));
}

std::pair<std::string, Matrix<float>> read_blob(std::istream& in) {
  std::string name = util::read_string(in);
  const auto rows = read_le<std::uint32_t>(in);
  const auto cols = read_le<std::uint32_t>(in);
  if (static_cast<std::uint64_t>(rows) * cols > (1ull << 32)) {
    throw NnError("checkpoint blob " + name + " is implausibly large");
  }
  Matrix<float> m(rows, cols);
  in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(float)));
  if (!in) throw NnError("checkpoint truncated inside blob " + name);
  return {std::move(name), std::move(m)};
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  ckpt.config.validate();
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw NnError("cannot write checkpoint " + path.string());
    util::write_magic(out, "TWCK");
    write_le<std::uint32_t>(out, Checkpoint::kVersion);
    const auto& c = ckpt.config;
    for (int v : {c.layers, c.heads, c.d_model, c.d_ff, c.max_rel_dist}) {
      write_le<std::uint32_t>(out, static_cast<std::uint32_t>(v));
    }
    write_le<double>(out, c.dropout);
    write_le<std::uint8_t>(out, c.pre_norm ? 1 : 0);
    write_le<std::uint8_t>(out, c.key_pos_embedding ? 1 : 0);
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(c.d_in));
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(c.d_out));

    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.metadata.size()));
    for (const auto& [k, v] : ckpt.metadata) {
      util::write_string(out, k);
      util::write_string(out, v);
    }
    std::uint32_t n = 0;
    ckpt.params.for_each([&](const std::string&, const Matrix<float>&) { ++n; });
    write_le<std::uint32_t>(out, n);
    ckpt.params.for_each([&](const std::string& name, const Matrix<float>& m) { write_blob(out, name, m); });
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.extras.size()));
    for (const auto& [name, m] : ckpt.extras) write_blob(out, name, m);
    if (!out) throw NnError("failed writing checkpoint " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NnError("cannot open checkpoint " + path.string());
  util::expect_magic(in, "TWCK", "checkpoint");
  const auto version = read_le<std::uint32_t>(in);
  if (version != Checkpoint::kVersion) {
    throw NnError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  auto& c = ckpt.config;
  c.layers = static_cast<int>(read_le<std::uint32_t>(in));
  c.heads = static_cast<int>(read_le<std::uint32_t>(in));
  c.d_model = static_cast<int>(read_le<std::uint32_t>(in));
  c.d_ff = static_cast<int>(read_le<std::uint32_t>(in));
  c.max_rel_dist = static_cast<int>(read_le<std::uint32_t>(in));
  c.dropout = read_le<double>(in);
  c.pre_norm = read_le<std::uint8_t>(in) != 0;
  c.key_pos_embedding = read_le<std::uint8_t>(in) != 0;
  c.d_in = static_cast<int>(read_le<std::uint32_t>(in));
  c.d_out = static_cast<int>(read_le<std::uint32_t>(in));
  c.validate();

  const auto n_meta = read_le<std::uint32_t>(in);
  for (std::uint32_t k = 0; k < n_meta; ++k) {
    std::string key = util::read_string(in);
    ckpt.metadata[key] = util::read_string(in);
  }

  ckpt.params = init_params<float>(c, 0);
  const auto n_params = read_le<std::uint32_t>(in);
  std::map<std::string, Matrix<float>> blobs;
  for (std::uint32_t k = 0; k < n_params; ++k) blobs.insert(read_blob(in));
  ckpt.params.for_each([&](const std::string& name, Matrix<float>& m) {
    const auto it = blobs.find(name);
    if (it == blobs.end()) throw NnError("checkpoint is missing parameter " + name);
    if (it->second.rows() != m.rows() || it->second.cols() != m.cols()) {
      throw NnError("checkpoint parameter " + name + " has the wrong shape");
    }
    if (!it->second.allFinite()) throw NnError("checkpoint parameter " + name + " is not finite");
    m = it->second;
    blobs.erase(it);
  });
  if (!blobs.empty()) throw NnError("checkpoint has unknown parameter " + blobs.begin()->first);

  const auto n_extra = read_le<std::uint32_t>(in);
  for (std::uint32_t k = 0; k < n_extra; ++k) ckpt.extras.insert(read_blob(in));
  return ckpt;
}

}  // namespace tween::nn
