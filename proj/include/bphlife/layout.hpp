#ifndef BPHLIFE_LAYOUT_HPP
#define BPHLIFE_LAYOUT_HPP

#include <algorithm>
#include <array>
#include <cstddef>
#include <string>

#include "bphlife/errors.hpp"
#include "bphlife/params.hpp"

namespace bphlife {

// Transient sub-state families, in flat-index order.
enum class Block {
  joint,              // both alive, physiological pair (i+l-1, j+l-1)
  widower_bereaved,   // wife dead, husband in the bereavement phase
  widower_recovered,  // wife dead, husband recovered
  widow_bereaved,     // husband dead, wife in the bereavement phase
  widow_recovered,    // husband dead, wife recovered
};

inline constexpr std::array<Block, 5> kAllBlocks = {
    Block::joint, Block::widower_bereaved, Block::widower_recovered,
    Block::widow_bereaved, Block::widow_recovered};

inline const char* to_string(Block b) {
  switch (b) {
    case Block::joint: return "joint";
    case Block::widower_bereaved: return "widower_bereaved";
    case Block::widower_recovered: return "widower_recovered";
    case Block::widow_bereaved: return "widow_bereaved";
    case Block::widow_recovered: return "widow_recovered";
  }
  return "?";
}

// `level` is 1-based within its block.
struct StateLabel {
  Block block;
  int level;

  friend bool operator==(const StateLabel&, const StateLabel&) = default;
};

// Index maps between (block, level) labels and flat 0-based state indices.
//
// Flat order: joint [d0], widower bereaved [d1], widower recovered [d1],
// widow bereaved [d2], widow recovered [d2]. Every transition of the model
// goes from a lower flat index to a higher one.
class StateSpaceLayout {
 public:
  StateSpaceLayout(int n, int i, int j) : n_(n), i_(i), j_(j) {
    if (n < 1 || i < 1 || i > n || j < 1 || j > n)
      throw ValidationError("layout requires 1 <= i, j <= n");
    d0_ = n - std::max(i, j) + 1;
    d1_ = n - i + 1;
    d2_ = n - j + 1;
  }

  int n() const { return n_; }
  int i() const { return i_; }
  int j() const { return j_; }
  int d0() const { return d0_; }
  int d1() const { return d1_; }
  int d2() const { return d2_; }
  std::size_t dim() const { return static_cast<std::size_t>(d0_ + 2 * d1_ + 2 * d2_); }

  int size(Block b) const {
    switch (b) {
      case Block::joint: return d0_;
      case Block::widower_bereaved:
      case Block::widower_recovered: return d1_;
      case Block::widow_bereaved:
      case Block::widow_recovered: return d2_;
    }
    return 0;
  }

  std::size_t offset(Block b) const {
    switch (b) {
      case Block::joint: return 0;
      case Block::widower_bereaved: return d0_;
      case Block::widower_recovered: return d0_ + d1_;
      case Block::widow_bereaved: return d0_ + 2 * d1_;
      case Block::widow_recovered: return d0_ + 2 * d1_ + d2_;
    }
    return 0;
  }

  std::size_t index(Block b, int level) const {
    if (level < 1 || level > size(b))
      throw ValidationError(std::string("level out of range for block ") + to_string(b));
    return offset(b) + static_cast<std::size_t>(level - 1);
  }

  StateLabel label(std::size_t flat) const {
    if (flat >= dim()) throw ValidationError("flat index out of range");
    for (auto it = kAllBlocks.rbegin(); it != kAllBlocks.rend(); ++it) {
      if (flat >= offset(*it))
        return {*it, static_cast<int>(flat - offset(*it)) + 1};
    }
    return {Block::joint, 1};
  }

  // Physiological ages carried by a state; 0 marks a dead spouse.
  int husband_age(const StateLabel& s) const {
    switch (s.block) {
      case Block::joint:
      case Block::widower_bereaved:
      case Block::widower_recovered: return i_ + s.level - 1;
      default: return 0;
    }
  }
  int wife_age(const StateLabel& s) const {
    switch (s.block) {
      case Block::joint:
      case Block::widow_bereaved:
      case Block::widow_recovered: return j_ + s.level - 1;
      default: return 0;
    }
  }

  // Block ranges used by the marginal representations.
  std::size_t widower_offset() const { return offset(Block::widower_bereaved); }
  std::size_t widow_offset() const { return offset(Block::widow_bereaved); }

 private:
  int n_, i_, j_;
  int d0_, d1_, d2_;
};

inline StateSpaceLayout build_layout(const ValidatedParams& p) {
  return StateSpaceLayout(p->n, p->i, p->j);
}

}  // namespace bphlife

#endif  // BPHLIFE_LAYOUT_HPP
