#include "tween/data/bvh.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <vector>

namespace tween::data {
namespace {

using motion::Quat;
using motion::Vec3;

struct Token {
  std::string_view text;
  std::size_t line;
};

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> tokens;
  std::size_t line = 1;
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (c == '\n') {
      ++line;
      ++i;
    } else if (c == ' ' || c == '\t' || c == '\r') {
      ++i;
    } else {
      std::size_t j = i;
      while (j < text.size() && text[j] != ' ' && text[j] != '\t' && text[j] != '\r' &&
             text[j] != '\n') {
        ++j;
      }
      tokens.push_back({text.substr(i, j - i), line});
      i = j;
    }
  }
  return tokens;
}

enum class Channel { Xpos, Ypos, Zpos, Xrot, Yrot, Zrot };

struct JointSpec {
  std::string name;
  int parent = -1;
  Vec3 offset = Vec3::Zero();
  std::vector<Channel> channels;
  std::size_t channel_line = 0;
};

class Parser {
 public:
  Parser(std::string_view text, const BvhOptions& options)
      : tokens_(tokenize(text)), options_(options) {}

  AnimationClip parse(const std::string& name) {
    expect("HIERARCHY");
    const Token root = next();
    if (root.text != "ROOT") fail("expected ROOT, got '" + std::string(root.text) + "'", root);
    parse_joint(-1);
    expect("MOTION");
    expect("Frames:");
    const Token frames_tok = next();
    const long frame_count = to_long(frames_tok);
    if (frame_count < 0) fail("negative frame count", frames_tok);
    expect("Frame");
    expect("Time:");
    const Token time_tok = next();
    const double frame_time = to_double(time_tok);
    if (!(frame_time > 0.0)) fail("frame time must be positive", time_tok);

    for (const auto& j : joints_) {
      validate_rotation_order(j);
    }

    AnimationClip clip;
    clip.name = name;
    clip.fps = 1.0 / frame_time;
    clip.skeleton.joint_names.reserve(joints_.size());
    for (const auto& j : joints_) {
      clip.skeleton.joint_names.push_back(j.name);
      clip.skeleton.parents.push_back(j.parent);
      clip.skeleton.rest_offsets.push_back(j.offset * options_.unit_scale);
    }

    std::size_t channels_per_frame = 0;
    for (const auto& j : joints_) channels_per_frame += j.channels.size();

    clip.frames.reserve(static_cast<std::size_t>(frame_count));
    for (long f = 0; f < frame_count; ++f) {
      if (pos_ + channels_per_frame > tokens_.size()) {
        const std::size_t line = pos_ < tokens_.size() ? tokens_[pos_].line : last_line();
        throw BvhError("channel-count mismatch: frame " + std::to_string(f) + " expects " +
                           std::to_string(channels_per_frame) + " values",
                       line);
      }
      const std::size_t frame_line = tokens_[pos_].line;
      motion::LocalPose pose;
      pose.root_world_pos = clip.skeleton.rest_offsets[0];
      pose.local_rot.resize(joints_.size());
      for (std::size_t ji = 0; ji < joints_.size(); ++ji) {
        Quat rot = Quat::Identity();
        Vec3 translation = Vec3::Zero();
        for (const Channel ch : joints_[ji].channels) {
          const Token& t = tokens_[pos_++];
          if (t.line != frame_line) {
            throw BvhError("channel-count mismatch: frame " + std::to_string(f) +
                               " line ends early",
                           frame_line);
          }
          const double v = to_double(t);
          switch (ch) {
            case Channel::Xpos: translation.x() = v; break;
            case Channel::Ypos: translation.y() = v; break;
            case Channel::Zpos: translation.z() = v; break;
            case Channel::Xrot: rot = rot * axis_rotation(v, Vec3::UnitX()); break;
            case Channel::Yrot: rot = rot * axis_rotation(v, Vec3::UnitY()); break;
            case Channel::Zrot: rot = rot * axis_rotation(v, Vec3::UnitZ()); break;
          }
        }
        pose.local_rot[ji] = rot.normalized();
        if (ji == 0) pose.root_world_pos += translation * options_.unit_scale;
      }
      if (pos_ < tokens_.size() && tokens_[pos_].line == frame_line) {
        throw BvhError("channel-count mismatch: extra values on frame " + std::to_string(f),
                       frame_line);
      }
      clip.frames.push_back(std::move(pose));
    }
    if (pos_ != tokens_.size()) {
      throw BvhError("channel-count mismatch: trailing data after " +
                         std::to_string(frame_count) + " frames",
                     tokens_[pos_].line);
    }
    try {
      clip.skeleton.validate();
    } catch (const motion::MotionError& e) {
      throw BvhError(e.what(), 1);
    }
    return clip;
  }

 private:
  static Quat axis_rotation(double degrees, const Vec3& axis) {
    return Quat(Eigen::AngleAxisd(degrees * std::numbers::pi / 180.0, axis));
  }

  void parse_joint(int parent) {
    const Token name_tok = next();
    JointSpec spec;
    spec.name = std::string(name_tok.text);
    spec.parent = parent;
    const int index = static_cast<int>(joints_.size());
    expect("{");
    expect("OFFSET");
    for (int k = 0; k < 3; ++k) spec.offset[k] = to_double(next());
    const Token ch_kw = next();
    if (ch_kw.text != "CHANNELS") fail("expected CHANNELS", ch_kw);
    spec.channel_line = ch_kw.line;
    const Token count_tok = next();
    const long count = to_long(count_tok);
    if (count < 0 || count > 6) fail("invalid channel count", count_tok);
    for (long k = 0; k < count; ++k) {
      const Token c = next();
      spec.channels.push_back(to_channel(c));
    }
    joints_.push_back(std::move(spec));

    while (true) {
      const Token t = next();
      if (t.text == "}") break;
      if (t.text == "JOINT") {
        parse_joint(index);
      } else if (t.text == "End") {
        expect("Site");
        expect("{");
        expect("OFFSET");
        for (int k = 0; k < 3; ++k) to_double(next());
        expect("}");
      } else {
        fail("unexpected token '" + std::string(t.text) + "' in joint block", t);
      }
    }
  }

  void validate_rotation_order(const JointSpec& j) const {
    int x = 0, y = 0, z = 0;
    for (const Channel c : j.channels) {
      x += c == Channel::Xrot;
      y += c == Channel::Yrot;
      z += c == Channel::Zrot;
    }
    if (x != 1 || y != 1 || z != 1) {
      throw BvhError("unsupported rotation order for joint '" + j.name +
                         "': need one X, Y and Z rotation channel",
                     j.channel_line);
    }
  }

  Channel to_channel(const Token& t) const {
    if (t.text == "Xposition") return Channel::Xpos;
    if (t.text == "Yposition") return Channel::Ypos;
    if (t.text == "Zposition") return Channel::Zpos;
    if (t.text == "Xrotation") return Channel::Xrot;
    if (t.text == "Yrotation") return Channel::Yrot;
    if (t.text == "Zrotation") return Channel::Zrot;
    fail("unknown channel '" + std::string(t.text) + "'", t);
  }

  const Token& next() {
    if (pos_ >= tokens_.size()) throw BvhError("unexpected end of file", last_line());
    return tokens_[pos_++];
  }

  void expect(std::string_view word) {
    const Token& t = next();
    if (t.text != word) {
      fail("expected '" + std::string(word) + "', got '" + std::string(t.text) + "'", t);
    }
  }

  [[noreturn]] static void fail(const std::string& message, const Token& t) {
    throw BvhError(message, t.line);
  }

  std::size_t last_line() const { return tokens_.empty() ? 1 : tokens_.back().line; }

  static double to_double(const Token& t) {
    // std::from_chars for double is available in libstdc++ 11.
    double v = 0.0;
    const auto* begin = t.text.data();
    const auto* end = begin + t.text.size();
    if (begin != end && *begin == '+') ++begin;
    const auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc() || ptr != end || !std::isfinite(v)) {
      fail("expected a number, got '" + std::string(t.text) + "'", t);
    }
    return v;
  }

  static long to_long(const Token& t) {
    long v = 0;
    const auto [ptr, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
    if (ec != std::errc() || ptr != t.text.data() + t.text.size()) {
      fail("expected an integer, got '" + std::string(t.text) + "'", t);
    }
    return v;
  }

  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
  std::vector<JointSpec> joints_;
  BvhOptions options_;
};

// R = Rz(z) * Ry(y) * Rx(x), angles in degrees.
Vec3 zyx_euler_degrees(const Quat& q) {
  const motion::Mat3 m = q.normalized().toRotationMatrix();
  const double sy = -m(2, 0);
  double x = 0.0, y = 0.0, z = 0.0;
  if (std::abs(sy) < 1.0 - 1e-12) {
    y = std::asin(sy);
    x = std::atan2(m(2, 1), m(2, 2));
    z = std::atan2(m(1, 0), m(0, 0));
  } else {
    // Gimbal lock: fold everything into z.
    y = sy > 0 ? std::numbers::pi / 2 : -std::numbers::pi / 2;
    x = 0.0;
    z = std::atan2(-m(0, 1), m(1, 1));
  }
  constexpr double k = 180.0 / std::numbers::pi;
  return Vec3(z * k, y * k, x * k);
}

void append_number(std::string& out, double v) {
  std::array<char, 64> buf{};
  std::snprintf(buf.data(), buf.size(), "%.10g", v);
  out += buf.data();
}

void write_joint(const AnimationClip& clip, std::size_t index, int depth, std::string& out) {
  const auto& s = clip.skeleton;
  const std::string indent(static_cast<std::size_t>(depth) * 2, ' ');
  const std::string name =
      index < s.joint_names.size() ? s.joint_names[index] : "joint" + std::to_string(index);
  out += indent + (index == 0 ? "ROOT " : "JOINT ") + name + "\n";
  out += indent + "{\n";
  out += indent + "  OFFSET ";
  for (int k = 0; k < 3; ++k) {
    append_number(out, s.rest_offsets[index][k]);
    out += k < 2 ? " " : "\n";
  }
  if (index == 0) {
    out += indent + "  CHANNELS 6 Xposition Yposition Zposition Zrotation Yrotation Xrotation\n";
  } else {
    out += indent + "  CHANNELS 3 Zrotation Yrotation Xrotation\n";
  }
  bool has_child = false;
  for (std::size_t c = index + 1; c < s.joint_count(); ++c) {
    if (s.parents[c] == static_cast<int>(index)) {
      has_child = true;
      write_joint(clip, c, depth + 1, out);
    }
  }
  if (!has_child) {
    out += indent + "  End Site\n" + indent + "  {\n" + indent + "    OFFSET 0 0 0\n" + indent +
           "  }\n";
  }
  out += indent + "}\n";
}

// BVH writes joints depth-first; our skeletons only guarantee parents[i] < i.
std::vector<std::size_t> depth_first_order(const motion::Skeleton& s) {
  std::vector<std::size_t> order;
  std::vector<std::size_t> stack{0};
  while (!stack.empty()) {
    const std::size_t j = stack.back();
    stack.pop_back();
    order.push_back(j);
    for (std::size_t c = s.joint_count(); c-- > j + 1;) {
      if (s.parents[c] == static_cast<int>(j)) stack.push_back(c);
    }
  }
  return order;
}

}  // namespace

AnimationClip parse_bvh(std::string_view text, const std::string& name, const BvhOptions& options) {
  return Parser(text, options).parse(name);
}

AnimationClip load_bvh(const std::filesystem::path& path, const BvhOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open bvh file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_bvh(buffer.str(), path.stem().string(), options);
}

std::string write_bvh(const AnimationClip& clip) {
  clip.validate();
  std::string out = "HIERARCHY\n";
  write_joint(clip, 0, 0, out);
  out += "MOTION\nFrames: " + std::to_string(clip.frames.size()) + "\nFrame Time: ";
  append_number(out, 1.0 / clip.fps);
  out += "\n";

  const auto order = depth_first_order(clip.skeleton);
  for (const auto& frame : clip.frames) {
    const Vec3 p = frame.root_world_pos - clip.skeleton.rest_offsets[0];
    for (int k = 0; k < 3; ++k) {
      append_number(out, p[k]);
      out += ' ';
    }
    for (std::size_t n = 0; n < order.size(); ++n) {
      const Vec3 e = zyx_euler_degrees(frame.local_rot[order[n]]);
      for (int k = 0; k < 3; ++k) {
        append_number(out, e[k]);
        out += (n + 1 == order.size() && k == 2) ? '\n' : ' ';
      }
    }
  }
  return out;
}

void save_bvh(const AnimationClip& clip, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write bvh file " + path.string());
  out << write_bvh(clip);
}

}  // namespace tween::data
