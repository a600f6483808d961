#pragma once

#include <array>
#include <cstdint>
#include <ostream>
#include <string_view>

namespace popcheck {

// Three-valued truth domain ordered FALSE < UNKNOWN < TRUE.
enum class Ternary : std::uint8_t { False = 0, Unknown = 1, True = 2 };

namespace detail {

// Tables indexed by the enum value, laid out in lattice order.
inline constexpr std::array<std::array<Ternary, 3>, 3> kAndTable{{
    {Ternary::False, Ternary::False, Ternary::False},
    {Ternary::False, Ternary::Unknown, Ternary::Unknown},
    {Ternary::False, Ternary::Unknown, Ternary::True},
}};

inline constexpr std::array<std::array<Ternary, 3>, 3> kOrTable{{
    {Ternary::False, Ternary::Unknown, Ternary::True},
    {Ternary::Unknown, Ternary::Unknown, Ternary::True},
    {Ternary::True, Ternary::True, Ternary::True},
}};

inline constexpr std::array<Ternary, 3> kNotTable{Ternary::True, Ternary::Unknown, Ternary::False};

constexpr std::size_t idx(Ternary t) { return static_cast<std::size_t>(t); }

} // namespace detail

constexpr Ternary t_and(Ternary a, Ternary b) { return detail::kAndTable[detail::idx(a)][detail::idx(b)]; }
constexpr Ternary t_or(Ternary a, Ternary b) { return detail::kOrTable[detail::idx(a)][detail::idx(b)]; }
constexpr Ternary t_not(Ternary a) { return detail::kNotTable[detail::idx(a)]; }

constexpr Ternary lift(bool b) { return b ? Ternary::True : Ternary::False; }

constexpr bool is_decided(Ternary t) { return t != Ternary::Unknown; }

constexpr std::string_view to_string(Ternary t)
{
    switch (t) {
    case Ternary::True: return "true";
    case Ternary::False: return "false";
    case Ternary::Unknown: break;
    }
    return "unknown";
}

inline std::ostream& operator<<(std::ostream& os, Ternary t) { return os << to_string(t); }

} // namespace popcheck
