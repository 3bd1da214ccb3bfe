#pragma once

#include <algorithm>
#include <bit>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <string_view>

#include <boost/container/small_vector.hpp>

#include "error.hpp"

namespace srphist {

/// Unbounded positive integer naming a node of the infinite plane binary
/// tree: root = 1, left child of n = 2n, right child = 2n + 1. The bits after
/// the leading one spell the path from the root (0 = left, 1 = right).
///
/// Stored as little-endian 64-bit limbs; the top limb is always nonzero.
/// Labels below 2^128 never touch the heap.
class NodeLabel {
public:
    using Limb = std::uint64_t;

    NodeLabel() : limbs_{1} {}

    explicit NodeLabel(Limb value) : limbs_{value} {
        if (value == 0) throw Error(Errc::invalid_argument, "node labels start at 1");
    }

    static NodeLabel root() { return NodeLabel(); }

    /// Parses a decimal string.
    static NodeLabel from_string(std::string_view text) {
        if (text.empty()) throw Error(Errc::parse_error, "empty node label");
        NodeLabel out;
        out.limbs_.assign(1, 0);
        for (char ch : text) {
            if (ch < '0' || ch > '9')
                throw Error(Errc::parse_error, "node label is not a decimal integer: " + std::string(text));
            out.mul_add(10, static_cast<Limb>(ch - '0'));
        }
        if (out.limbs_.size() == 1 && out.limbs_[0] == 0)
            throw Error(Errc::parse_error, "node label must be >= 1");
        return out;
    }

    bool is_root() const noexcept { return limbs_.size() == 1 && limbs_[0] == 1; }

    /// Number of edges from the root (index of the most significant bit).
    std::size_t depth() const noexcept {
        return 64 * (limbs_.size() - 1) + (63 - static_cast<std::size_t>(std::countl_zero(limbs_.back())));
    }

    NodeLabel left() const { return child(false); }
    NodeLabel right() const { return child(true); }

    NodeLabel child(bool right_side) const {
        NodeLabel out = *this;
        out.push_bit(right_side);
        return out;
    }

    NodeLabel parent() const {
        if (is_root()) throw Error(Errc::root_has_no_parent, "the root node has no parent");
        NodeLabel out = *this;
        out.pop_bit();
        return out;
    }

    NodeLabel sibling() const {
        if (is_root()) throw Error(Errc::root_has_no_parent, "the root node has no sibling");
        NodeLabel out = *this;
        out.limbs_[0] ^= 1;
        return out;
    }

    bool is_right_child() const noexcept { return !is_root() && (limbs_[0] & 1) != 0; }

    /// Direction taken at step `step` of the root-to-node path, step 0 being
    /// the first edge below the root. true means right.
    bool path_bit(std::size_t step) const noexcept {
        const std::size_t bit = depth() - 1 - step;
        return ((limbs_[bit / 64] >> (bit % 64)) & 1) != 0;
    }

    /// Shifts in one path step (in place).
    void push_bit(bool right_side) {
        const Limb carry = limbs_.back() >> 63;
        for (std::size_t i = limbs_.size(); i-- > 1;) limbs_[i] = (limbs_[i] << 1) | (limbs_[i - 1] >> 63);
        limbs_[0] = (limbs_[0] << 1) | (right_side ? 1 : 0);
        if (carry != 0) limbs_.push_back(carry);
    }

    /// Removes the last path step (in place). Precondition: not the root.
    void pop_bit() noexcept {
        for (std::size_t i = 0; i + 1 < limbs_.size(); ++i) limbs_[i] = (limbs_[i] >> 1) | (limbs_[i + 1] << 63);
        limbs_.back() >>= 1;
        if (limbs_.size() > 1 && limbs_.back() == 0) limbs_.pop_back();
    }

    /// Ancestor `levels` steps up (levels <= depth()).
    NodeLabel ancestor(std::size_t levels) const {
        NodeLabel out = *this;
        for (std::size_t i = 0; i < levels; ++i) out.pop_bit();
        return out;
    }

    bool fits_u64() const noexcept { return limbs_.size() == 1; }
    Limb low_limb() const noexcept { return limbs_[0]; }

    std::string to_string() const {
        if (fits_u64()) return std::to_string(limbs_[0]);
        constexpr Limb kChunk = 10'000'000'000'000'000'000ULL;  // 10^19
        boost::container::small_vector<Limb, 4> work(limbs_.begin(), limbs_.end());
        std::string digits;
        while (!(work.size() == 1 && work[0] == 0)) {
            unsigned __int128 rem = 0;
            for (std::size_t i = work.size(); i-- > 0;) {
                const unsigned __int128 cur = (rem << 64) | work[i];
                work[i] = static_cast<Limb>(cur / kChunk);
                rem = cur % kChunk;
            }
            while (work.size() > 1 && work.back() == 0) work.pop_back();
            auto chunk = static_cast<Limb>(rem);
            const bool last = work.size() == 1 && work[0] == 0;
            for (int k = 0; k < 19 && (!last || chunk != 0); ++k) {
                digits.push_back(static_cast<char>('0' + chunk % 10));
                chunk /= 10;
            }
        }
        std::reverse(digits.begin(), digits.end());
        return digits;
    }

    std::size_t hash() const noexcept {
        std::size_t h = limbs_.size();
        for (Limb limb : limbs_) {
            Limb x = limb + 0x9e3779b97f4a7c15ULL + (static_cast<Limb>(h) << 6) + (static_cast<Limb>(h) >> 2);
            x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
            x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
            h = static_cast<std::size_t>(x ^ (x >> 31));
        }
        return h;
    }

    friend bool operator==(const NodeLabel& a, const NodeLabel& b) noexcept {
        return a.limbs_.size() == b.limbs_.size() && std::equal(a.limbs_.begin(), a.limbs_.end(), b.limbs_.begin());
    }

    /// Numeric order; equals breadth-first order, left to right within a level.
    friend std::strong_ordering operator<=>(const NodeLabel& a, const NodeLabel& b) noexcept {
        if (a.limbs_.size() != b.limbs_.size()) return a.limbs_.size() <=> b.limbs_.size();
        for (std::size_t i = a.limbs_.size(); i-- > 0;)
            if (a.limbs_[i] != b.limbs_[i]) return a.limbs_[i] <=> b.limbs_[i];
        return std::strong_ordering::equal;
    }

    friend std::ostream& operator<<(std::ostream& os, const NodeLabel& n) { return os << n.to_string(); }

private:
    void mul_add(Limb mul, Limb add) {
        unsigned __int128 carry = add;
        for (auto& limb : limbs_) {
            const unsigned __int128 cur = static_cast<unsigned __int128>(limb) * mul + carry;
            limb = static_cast<Limb>(cur);
            carry = cur >> 64;
        }
        if (carry != 0) limbs_.push_back(static_cast<Limb>(carry));
    }

    boost::container::small_vector<Limb, 2> limbs_;
};

inline NodeLabel parent(const NodeLabel& n) { return n.parent(); }
inline std::pair<NodeLabel, NodeLabel> children(const NodeLabel& n) { return {n.left(), n.right()}; }
inline std::size_t depth(const NodeLabel& n) noexcept { return n.depth(); }

struct NodeLabelHash {
    std::size_t operator()(const NodeLabel& n) const noexcept { return n.hash(); }
};

}  // namespace srphist

template <>
struct std::hash<srphist::NodeLabel> {
    std::size_t operator()(const srphist::NodeLabel& n) const noexcept { return n.hash(); }
};
