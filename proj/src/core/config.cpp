#include <sstream>

#include "hpnet/errors.hpp"
#include "hpnet/network.hpp"

namespace hpnet {

std::string_view scheme_name(Scheme scheme) {
  switch (scheme) {
    case Scheme::FrameToFrame: return "ff";
    case Scheme::BlockToFrame: return "bf";
    case Scheme::BlockToBlock: return "bb";
  }
  return "?";
}

Scheme parse_scheme(std::string_view name) {
  if (name == "ff") return Scheme::FrameToFrame;
  if (name == "bf") return Scheme::BlockToFrame;
  if (name == "bb") return Scheme::BlockToBlock;
  throw ContractError("unknown scheme '" + std::string(name) + "' (expected ff, bf or bb)");
}

HPNetConfig HPNetConfig::for_scheme(Scheme scheme, std::size_t levels,
                                    std::vector<std::size_t> channels) {
  HPNetConfig c;
  c.scheme = scheme;
  c.levels = levels;
  c.channels = std::move(channels);
  switch (scheme) {
    case Scheme::FrameToFrame: c.block_depth = 1, c.block_stride = 1; break;
    case Scheme::BlockToFrame: c.block_depth = 5, c.block_stride = 1; break;
    case Scheme::BlockToBlock: c.block_depth = 5, c.block_stride = 5; break;
  }
  return c;
}

void HPNetConfig::validate() const {
  if (levels < 1) throw ContractError("config: levels must be >= 1");
  if (channels.size() != levels) {
    throw ContractError("config: " + std::to_string(channels.size()) + " channel counts for " +
                        std::to_string(levels) + " levels");
  }
  for (auto c : channels)
    if (c < 1) throw ContractError("config: channel counts must be >= 1");
  if (block_depth < 1) throw ContractError("config: block_depth must be >= 1");
  if (block_stride < 1 || block_stride > block_depth) {
    throw ContractError("config: block_stride must be in [1, block_depth]");
  }
  if (scheme == Scheme::FrameToFrame && block_depth != 1) {
    throw ContractError("config: the ff scheme requires block_depth 1");
  }
  if (scheme == Scheme::BlockToBlock && block_stride != block_depth) {
    throw ContractError("config: the bb scheme requires block_stride == block_depth");
  }
  if (scheme == Scheme::BlockToFrame && block_stride != 1) {
    throw ContractError("config: the bf scheme requires block_stride 1");
  }
  const std::size_t unit = std::size_t{1} << (levels - 1);
  if (frame_height == 0 || frame_width == 0 || frame_height % unit || frame_width % unit) {
    throw ContractError("config: frame size " + std::to_string(frame_height) + "x" +
                        std::to_string(frame_width) + " is not divisible by " +
                        std::to_string(unit) + " for " + std::to_string(levels) + " levels");
  }
  if (!(p_max > 0.0)) throw ContractError("config: p_max must be positive");
}

std::size_t HPNetConfig::input_channels(std::size_t level) const {
  return level == 0 ? 1 : channels[level - 1];
}

std::size_t HPNetConfig::lstm_input_channels(std::size_t level) const {
  const std::size_t drive = level == 0 ? 1 : 2 * channels[level - 1];
  const std::size_t above = level + 1 < levels ? channels[level + 1] : 0;
  return drive + channels[level] + above;
}

Shape HPNetConfig::input_shape(std::size_t level) const {
  return {input_channels(level), block_depth, level_height(level), level_width(level)};
}

Shape HPNetConfig::state_shape(std::size_t level) const {
  return {channels[level], block_depth, level_height(level), level_width(level)};
}

double HPNetConfig::step_weight(std::size_t k, std::size_t n_steps) {
  if (k == 0 || n_steps < 2) return 0.0;
  return 1.0 / static_cast<double>(n_steps - 1);
}

std::string HPNetConfig::to_text() const {
  std::ostringstream os;
  os.precision(17);
  os << "levels=" << levels << "\nchannels=";
  for (std::size_t i = 0; i < channels.size(); ++i) os << (i ? "," : "") << channels[i];
  os << "\nblock_depth=" << block_depth << "\nblock_stride=" << block_stride
     << "\nscheme=" << scheme_name(scheme) << "\nframe_size=" << frame_height << "x"
     << frame_width << "\np_max=" << p_max << "\nupper_level_weight=" << upper_level_weight
     << "\n";
  return os.str();
}

HPNetConfig HPNetConfig::from_text(const std::string& text) {
  HPNetConfig c;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ContractError("config text: malformed line '" + line + "'");
    const std::string key = line.substr(0, eq), value = line.substr(eq + 1);
    if (key == "levels") {
      c.levels = std::stoul(value);
    } else if (key == "channels") {
      c.channels.clear();
      std::istringstream vs(value);
      std::string item;
      while (std::getline(vs, item, ',')) c.channels.push_back(std::stoul(item));
    } else if (key == "block_depth") {
      c.block_depth = std::stoul(value);
    } else if (key == "block_stride") {
      c.block_stride = std::stoul(value);
    } else if (key == "scheme") {
      c.scheme = parse_scheme(value);
    } else if (key == "frame_size") {
      const auto x = value.find('x');
      if (x == std::string::npos) throw ContractError("config text: bad frame_size '" + value + "'");
      c.frame_height = std::stoul(value.substr(0, x));
      c.frame_width = std::stoul(value.substr(x + 1));
    } else if (key == "p_max") {
      c.p_max = std::stod(value);
    } else if (key == "upper_level_weight") {
      c.upper_level_weight = std::stod(value);
    } else {
      throw ContractError("config text: unknown key '" + key + "'");
    }
  }
  c.validate();
  return c;
}

}  // namespace hpnet
