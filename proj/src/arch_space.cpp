#include "wsfl/arch_space.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace wsfl {

int SpaceConfig::mid_width(int ratio_index) const {
  return static_cast<int>(std::llround(ratio_choices.at(static_cast<std::size_t>(ratio_index)) *
                                       max_mid_width));
}

void SpaceConfig::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("SpaceConfig: " + msg); };
  if (stages < 1) fail("stages must be >= 1");
  if (base_depth < 0) fail("base_depth must be >= 0");
  if (max_extra_depth < 0) fail("max_extra_depth must be >= 0");
  if (blocks_per_stage() < 0) fail("base_depth + max_extra_depth must be >= 0");
  if (hidden_width < 1) fail("hidden_width must be >= 1");
  if (max_mid_width < 1) fail("max_mid_width must be >= 1");
  if (input_dim < 1) fail("input_dim must be >= 1");
  if (num_classes < 2) fail("num_classes must be >= 2");
  if (ratio_choices.empty()) fail("ratio_choices must be nonempty");
  for (std::size_t i = 0; i < ratio_choices.size(); ++i) {
    const double r = ratio_choices[i];
    if (!(r > 0.0 && r <= 1.0)) fail("ratio_choices entries must lie in (0, 1]");
    if (i > 0 && !(ratio_choices[i - 1] < r)) fail("ratio_choices must be strictly increasing");
    if (std::llround(r * max_mid_width) < 1) fail("ratio_choices entry rounds to a zero mid width");
  }
  if (ratio_choices.back() != 1.0) fail("ratio_choices must end with 1.0");
}

std::vector<TensorSpec> tensor_layout(const SpaceConfig& space) {
  const auto H = static_cast<Eigen::Index>(space.hidden_width);
  const auto M = static_cast<Eigen::Index>(space.max_mid_width);
  std::vector<TensorSpec> layout;
  layout.reserve(static_cast<std::size_t>(4 + space.max_blocks() * 4));
  layout.push_back({"stem.w", static_cast<Eigen::Index>(space.input_dim), H, false});
  layout.push_back({"stem.b", H, 1, true});
  for (int s = 0; s < space.stages; ++s) {
    for (int b = 0; b < space.blocks_per_stage(); ++b) {
      const std::string prefix = "s" + std::to_string(s) + ".b" + std::to_string(b) + ".";
      layout.push_back({prefix + "w1", H, M, false});
      layout.push_back({prefix + "b1", M, 1, true});
      layout.push_back({prefix + "w2", M, H, false});
      layout.push_back({prefix + "b2", H, 1, true});
    }
  }
  layout.push_back({"head.w", H, static_cast<Eigen::Index>(space.num_classes), false});
  layout.push_back({"head.b", static_cast<Eigen::Index>(space.num_classes), 1, true});
  return layout;
}

std::int64_t SliceMask::count() const {
  std::int64_t total = 0;
  for (const auto& slices : tensor_slices)
    for (const auto& s : slices) total += s.count();
  return total;
}

bool block_active(const SpaceConfig& space, const ArchDescriptor& arch, int stage, int block) {
  return block < space.base_depth + arch.depths.at(static_cast<std::size_t>(stage));
}

int active_block_count(const SpaceConfig& space, const ArchDescriptor& arch) {
  int n = 0;
  for (int d : arch.depths) n += space.base_depth + d;
  return n;
}

ArchDescriptor canonicalize(const SpaceConfig& space, ArchDescriptor arch) {
  if (arch.depths.size() != static_cast<std::size_t>(space.stages))
    throw std::invalid_argument("ArchDescriptor: depths length does not match stages");
  if (arch.ratios.size() != static_cast<std::size_t>(space.max_blocks()))
    throw std::invalid_argument("ArchDescriptor: ratios length does not match max block count");
  for (int d : arch.depths)
    if (d < 0 || d > space.max_extra_depth)
      throw std::invalid_argument("ArchDescriptor: depth out of range");
  const int num_ratios = static_cast<int>(space.ratio_choices.size());
  for (int r : arch.ratios)
    if (r < 0 || r >= num_ratios)
      throw std::invalid_argument("ArchDescriptor: ratio index out of range");
  for (int s = 0; s < space.stages; ++s)
    for (int b = 0; b < space.blocks_per_stage(); ++b)
      if (!block_active(space, arch, s, b))
        arch.ratios[static_cast<std::size_t>(s * space.blocks_per_stage() + b)] = 0;
  return arch;
}

ArchDescriptor smallest(const SpaceConfig& space) {
  return ArchDescriptor{std::vector<int>(static_cast<std::size_t>(space.stages), 0),
                        std::vector<int>(static_cast<std::size_t>(space.max_blocks()), 0)};
}

ArchDescriptor largest(const SpaceConfig& space) {
  return ArchDescriptor{
      std::vector<int>(static_cast<std::size_t>(space.stages), space.max_extra_depth),
      std::vector<int>(static_cast<std::size_t>(space.max_blocks()),
                       static_cast<int>(space.ratio_choices.size()) - 1)};
}

bool is_subarch(const SpaceConfig& space, const ArchDescriptor& a, const ArchDescriptor& b) {
  if (a.depths.size() != b.depths.size() || a.ratios.size() != b.ratios.size() ||
      a.depths.size() != static_cast<std::size_t>(space.stages))
    throw std::invalid_argument("is_subarch: descriptor/space mismatch");
  for (std::size_t s = 0; s < a.depths.size(); ++s)
    if (a.depths[s] > b.depths[s]) return false;
  for (int s = 0; s < space.stages; ++s)
    for (int blk = 0; blk < space.blocks_per_stage(); ++blk)
      if (block_active(space, a, s, blk)) {
        const std::size_t i = static_cast<std::size_t>(s * space.blocks_per_stage() + blk);
        if (a.ratios[i] > b.ratios[i]) return false;
      }
  return true;
}

std::uint64_t family_size(const SpaceConfig& space) {
  // Independent per stage: sum over one stage's depth choices of
  // r^(base + d), raised to the number of stages.
  const auto r = static_cast<std::uint64_t>(space.ratio_choices.size());
  auto ipow = [](std::uint64_t base, int exp) {
    std::uint64_t out = 1;
    for (int i = 0; i < exp; ++i) out *= base;
    return out;
  };
  std::uint64_t per_stage = 0;
  for (int d = 0; d <= space.max_extra_depth; ++d) per_stage += ipow(r, space.base_depth + d);
  return ipow(per_stage, space.stages);
}

SliceMask mask(const SpaceConfig& space, const ArchDescriptor& arch) {
  const ArchDescriptor canon = canonicalize(space, arch);
  const auto layout = tensor_layout(space);
  SliceMask out;
  out.tensor_slices.resize(layout.size());
  auto full = [&](int idx) {
    out.tensor_slices[static_cast<std::size_t>(idx)].push_back(
        Slice{0, layout[static_cast<std::size_t>(idx)].rows, 0,
              layout[static_cast<std::size_t>(idx)].cols});
  };
  full(stem_w_index());
  full(stem_b_index());
  const auto H = static_cast<Eigen::Index>(space.hidden_width);
  for (int s = 0; s < space.stages; ++s) {
    for (int b = 0; b < space.blocks_per_stage(); ++b) {
      if (!block_active(space, canon, s, b)) continue;
      const auto m = static_cast<Eigen::Index>(
          space.mid_width(canon.ratios[static_cast<std::size_t>(s * space.blocks_per_stage() + b)]));
      const auto M = static_cast<Eigen::Index>(space.max_mid_width);
      auto& w1 = out.tensor_slices[static_cast<std::size_t>(block_tensor_index(space, s, b, 0))];
      auto& b1 = out.tensor_slices[static_cast<std::size_t>(block_tensor_index(space, s, b, 1))];
      auto& w2 = out.tensor_slices[static_cast<std::size_t>(block_tensor_index(space, s, b, 2))];
      auto& b2 = out.tensor_slices[static_cast<std::size_t>(block_tensor_index(space, s, b, 3))];
      w1.push_back(Slice{0, H, 0, m});  // first matrix: all rows, first m columns
      b1.push_back(Slice{0, m, 0, 1});
      w2.push_back(Slice{0, m, 0, H});  // second matrix: first m rows, all columns
      b2.push_back(Slice{0, H, 0, 1});
      (void)M;
    }
  }
  full(head_w_index(space));
  full(head_b_index(space));
  return out;
}

std::int64_t param_count(const SpaceConfig& space, const ArchDescriptor& arch) {
  return mask(space, arch).count();
}

std::int64_t flops(const SpaceConfig& space, const ArchDescriptor& arch) {
  const ArchDescriptor canon = canonicalize(space, arch);
  const auto H = static_cast<std::int64_t>(space.hidden_width);
  std::int64_t macs = static_cast<std::int64_t>(space.input_dim) * H +
                      H * static_cast<std::int64_t>(space.num_classes);
  for (int s = 0; s < space.stages; ++s)
    for (int b = 0; b < space.blocks_per_stage(); ++b)
      if (block_active(space, canon, s, b)) {
        const auto m = static_cast<std::int64_t>(
            space.mid_width(canon.ratios[static_cast<std::size_t>(s * space.blocks_per_stage() + b)]));
        macs += 2 * H * m;
      }
  return 2 * macs;
}

ArchDescriptor random_arch(const SpaceConfig& space, Rng& rng) {
  ArchDescriptor arch;
  arch.depths.resize(static_cast<std::size_t>(space.stages));
  arch.ratios.resize(static_cast<std::size_t>(space.max_blocks()));
  for (auto& d : arch.depths)
    d = static_cast<int>(rng.bounded(static_cast<std::uint64_t>(space.max_extra_depth + 1)));
  for (auto& r : arch.ratios)
    r = static_cast<int>(rng.bounded(space.ratio_choices.size()));
  return canonicalize(space, arch);
}

namespace {

[[noreturn]] void parse_fail(std::size_t pos, const std::string& what) {
  throw std::runtime_error("arch parse error at position " + std::to_string(pos) + ": " + what);
}

struct Cursor {
  std::string_view text;
  std::size_t pos = 0;

  void skip_ws() {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
  }
  bool eat(char c) {
    skip_ws();
    if (pos < text.size() && text[pos] == c) {
      ++pos;
      return true;
    }
    return false;
  }
  void expect(char c) {
    if (!eat(c)) parse_fail(pos, std::string("expected '") + c + "'");
  }
  // Multiplication sign: ASCII 'x' or UTF-8 '×' (0xC3 0x97).
  bool eat_times() {
    skip_ws();
    if (pos < text.size() && (text[pos] == 'x' || text[pos] == 'X')) {
      ++pos;
      return true;
    }
    if (pos + 1 < text.size() && static_cast<unsigned char>(text[pos]) == 0xC3 &&
        static_cast<unsigned char>(text[pos + 1]) == 0x97) {
      pos += 2;
      return true;
    }
    return false;
  }
  long parse_long() {
    skip_ws();
    long value = 0;
    auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + text.size(), value);
    if (ec != std::errc()) parse_fail(pos, "expected integer");
    pos = static_cast<std::size_t>(ptr - text.data());
    return value;
  }
  double parse_double() {
    skip_ws();
    double value = 0;
    auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + text.size(), value);
    if (ec != std::errc()) parse_fail(pos, "expected number");
    pos = static_cast<std::size_t>(ptr - text.data());
    return value;
  }
};

// Parses `[ v, v, vxN, ... ]` where each element may carry a repeat count.
template <typename ParseOne, typename Emit>
void parse_list(Cursor& cur, ParseOne parse_one, Emit emit) {
  cur.expect('[');
  if (cur.eat(']')) return;
  for (;;) {
    const std::size_t item_pos = cur.pos;
    auto value = parse_one(cur);
    long repeat = 1;
    if (cur.eat_times()) {
      repeat = cur.parse_long();
      if (repeat < 1) parse_fail(item_pos, "repeat count must be >= 1");
    }
    for (long i = 0; i < repeat; ++i) emit(value, item_pos);
    if (cur.eat(']')) return;
    cur.expect(',');
  }
}

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

}  // namespace

ArchDescriptor parse_arch(const SpaceConfig& space, std::string_view text) {
  Cursor cur{text};
  cur.expect('d');
  cur.expect(':');
  ArchDescriptor arch;
  parse_list(
      cur, [](Cursor& c) { return c.parse_long(); },
      [&](long v, std::size_t pos) {
        if (v < 0 || v > space.max_extra_depth) parse_fail(pos, "depth out of range");
        arch.depths.push_back(static_cast<int>(v));
      });
  if (!cur.eat('-') && !cur.eat(',')) parse_fail(cur.pos, "expected '-' before e group");
  cur.expect('e');
  cur.expect(':');
  parse_list(
      cur, [](Cursor& c) { return c.parse_double(); },
      [&](double v, std::size_t pos) {
        int idx = -1;
        for (std::size_t i = 0; i < space.ratio_choices.size(); ++i)
          if (std::abs(space.ratio_choices[i] - v) < 1e-9) idx = static_cast<int>(i);
        if (idx < 0) parse_fail(pos, "ratio value is not one of the space's ratio choices");
        arch.ratios.push_back(idx);
      });
  cur.skip_ws();
  if (cur.pos != text.size()) parse_fail(cur.pos, "trailing characters");
  if (arch.depths.size() != static_cast<std::size_t>(space.stages))
    parse_fail(0, "depth list length does not match stages");
  if (arch.ratios.size() != static_cast<std::size_t>(space.max_blocks()))
    parse_fail(0, "ratio list length does not match max block count");
  return canonicalize(space, arch);
}

std::string format_arch(const SpaceConfig& space, const ArchDescriptor& arch) {
  const ArchDescriptor canon = canonicalize(space, arch);
  std::string out = "d:[";
  for (std::size_t i = 0; i < canon.depths.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(canon.depths[i]);
  }
  out += "]-e:[";
  for (std::size_t i = 0; i < canon.ratios.size(); ++i) {
    if (i) out += ',';
    out += format_double(space.ratio_choices[static_cast<std::size_t>(canon.ratios[i])]);
  }
  out += ']';
  return out;
}

}  // namespace wsfl
