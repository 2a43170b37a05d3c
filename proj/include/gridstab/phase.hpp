#pragma once

#include <array>
#include <bitset>
#include <cstddef>
#include <string>
#include <string_view>

namespace gridstab {

enum class Phase : std::size_t { A = 0, B = 1, C = 2 };

inline constexpr std::array<Phase, 3> kAllPhases{Phase::A, Phase::B, Phase::C};
inline constexpr std::array<char, 3> kPhaseLetters{'A', 'B', 'C'};

/// Set of conductors present at a node or on a line.
class PhaseSet {
public:
    PhaseSet() = default;
    explicit PhaseSet(std::bitset<3> bits) : bits_(bits) {}

    static PhaseSet all() { return PhaseSet(std::bitset<3>("111")); }

    /// Parses strings such as "ABC", "A", "AC" (case-insensitive). Throws
    /// ParseError on unknown letters, duplicates or an empty set.
    static PhaseSet parse(std::string_view text);

    bool contains(Phase p) const { return bits_.test(static_cast<std::size_t>(p)); }
    bool contains(std::size_t p) const { return bits_.test(p); }
    void insert(Phase p) { bits_.set(static_cast<std::size_t>(p)); }
    bool empty() const { return bits_.none(); }
    std::size_t size() const { return bits_.count(); }
    bool subset_of(PhaseSet other) const { return (bits_ & ~other.bits_).none(); }

    std::string to_string() const;
    std::bitset<3> bits() const { return bits_; }

    friend bool operator==(PhaseSet, PhaseSet) = default;

private:
    std::bitset<3> bits_;
};

}  // namespace gridstab
