#include "bdfns/restrictions.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "bdfns/errors.hpp"

namespace bdfns {

namespace {

// Rounding slack so that a dt produced by the clamp is never flagged.
constexpr double kSlack = 1e-12;

} // namespace

void RestrictionConfig::validate() const
{
    const auto check = [](bool enabled, double c, const char* name) {
        if (enabled && !(c > 0.0 && std::isfinite(c))) {
            throw ConfigError(std::string("restriction constant ") + name + " must be positive");
        }
    };
    check(enable_r1, c1, "c1");
    check(enable_r2, c2, "c2");
    check(enable_r3, c3, "c3");
}

std::string RestrictionFlags::to_string() const
{
    std::string out;
    const auto add = [&](bool flag, const char* name) {
        if (flag) {
            if (!out.empty()) {
                out += '|';
            }
            out += name;
        }
    };
    add(r1, "R1");
    add(r2, "R2");
    add(r3, "R3");
    return out;
}

RestrictionCheck check_restrictions(double dt, int q, double h, int d, const RestrictionConfig& config)
{
    if (!(h > 0.0)) {
        throw std::invalid_argument("check_restrictions: h must be positive");
    }
    if (!(dt > 0.0)) {
        throw std::invalid_argument("check_restrictions: dt must be positive");
    }
    if (q < 1 || d < 1) {
        throw std::invalid_argument("check_restrictions: q and d must be positive");
    }
    RestrictionCheck out{{}, std::numeric_limits<double>::infinity()};
    if (config.mode == RestrictionMode::Off) {
        return out;
    }
    config.validate();
    const double qd = static_cast<double>(q);
    if (config.enable_r1) {
        const double bound = config.c1 * std::pow(h, 0.5 * d);
        out.violated.r1 = std::pow(dt, qd) > bound * (1.0 + kSlack);
        out.max_dt = std::min(out.max_dt, std::pow(bound, 1.0 / qd));
    }
    if (config.enable_r2) {
        const double bound = config.c2 * h * h;
        out.violated.r2 = dt > bound * (1.0 + kSlack);
        out.max_dt = std::min(out.max_dt, bound);
    }
    if (config.enable_r3) {
        const double bound = config.c3 * std::pow(h, 1.5);
        out.violated.r3 = std::pow(dt, qd) > bound * (1.0 + kSlack);
        out.max_dt = std::min(out.max_dt, std::pow(bound, 1.0 / qd));
    }
    return out;
}

RestrictionMode parse_restriction_mode(const std::string& text)
{
    if (text == "off") {
        return RestrictionMode::Off;
    }
    if (text == "warn") {
        return RestrictionMode::Warn;
    }
    if (text == "clamp") {
        return RestrictionMode::Clamp;
    }
    throw ConfigError("restriction mode must be off, warn or clamp (got '" + text + "')");
}

std::string to_string(RestrictionMode mode)
{
    switch (mode) {
    case RestrictionMode::Off:
        return "off";
    case RestrictionMode::Warn:
        return "warn";
    case RestrictionMode::Clamp:
        return "clamp";
    }
    return "?";
}

} // namespace bdfns
