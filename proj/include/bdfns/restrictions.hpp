#pragma once

// Step-size restrictions coupling dt to the mesh width h:
//   R1: dt^q <= C1 h^{d/2}
//   R2: dt   <= C2 h^2
//   R3: dt^q <= C3 h^{3/2}

#include <string>

namespace bdfns {

enum class RestrictionMode { Off, Warn, Clamp };

struct RestrictionConfig {
    RestrictionMode mode = RestrictionMode::Warn;
    bool enable_r1 = true;
    bool enable_r2 = true;
    bool enable_r3 = true;
    double c1 = 1.0;
    double c2 = 1.0;
    double c3 = 1.0;

    /// Throws ConfigError when an enabled constant is not positive.
    void validate() const;
};

struct RestrictionFlags {
    bool r1 = false;
    bool r2 = false;
    bool r3 = false;

    [[nodiscard]] bool any() const noexcept { return r1 || r2 || r3; }
    /// "R1|R3"-style summary; empty when nothing is violated.
    [[nodiscard]] std::string to_string() const;

    friend bool operator==(const RestrictionFlags&, const RestrictionFlags&) = default;
};

struct RestrictionCheck {
    RestrictionFlags violated;
    /// Largest dt admitted by every enabled restriction (infinity when none is enabled).
    double max_dt;
};

/// Evaluates every enabled inequality; equality is admissible. With mode Off
/// nothing is flagged.
RestrictionCheck check_restrictions(double dt, int q, double h, int d, const RestrictionConfig& config);

RestrictionMode parse_restriction_mode(const std::string& text);
std::string to_string(RestrictionMode mode);

} // namespace bdfns
