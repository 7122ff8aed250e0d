#pragma once

#include <stdexcept>
#include <string>

namespace rmtlab {

enum class Errc {
    regime_violation,
    invalid_argument,
    not_positive_definite,
    decomposition_failure,
    no_convergence,
    degenerate_row,
    zero_vector,
    pole_hit,
    zero_mean_vector,
    path_disagreement,
    off_contour,
    invalid_hypothesis,
    spectrum_outside_contour,
    too_many_degenerate,
    insufficient_samples,
    singular_direction,
    grid_too_small,
    config_error,
};

inline const char* to_string(Errc code) noexcept
{
    switch (code) {
    case Errc::regime_violation: return "regime_violation";
    case Errc::invalid_argument: return "invalid_argument";
    case Errc::not_positive_definite: return "not_positive_definite";
    case Errc::decomposition_failure: return "decomposition_failure";
    case Errc::no_convergence: return "no_convergence";
    case Errc::degenerate_row: return "degenerate_row";
    case Errc::zero_vector: return "zero_vector";
    case Errc::pole_hit: return "pole_hit";
    case Errc::zero_mean_vector: return "zero_mean_vector";
    case Errc::path_disagreement: return "path_disagreement";
    case Errc::off_contour: return "off_contour";
    case Errc::invalid_hypothesis: return "invalid_hypothesis";
    case Errc::spectrum_outside_contour: return "spectrum_outside_contour";
    case Errc::too_many_degenerate: return "too_many_degenerate";
    case Errc::insufficient_samples: return "insufficient_samples";
    case Errc::singular_direction: return "singular_direction";
    case Errc::grid_too_small: return "grid_too_small";
    case Errc::config_error: return "config_error";
    }
    return "unknown";
}

/// Numerical failures (exit code 2 at the CLI) as opposed to bad input (exit code 1).
inline bool is_numerical(Errc code) noexcept
{
    switch (code) {
    case Errc::not_positive_definite:
    case Errc::decomposition_failure:
    case Errc::no_convergence:
    case Errc::degenerate_row:
    case Errc::pole_hit:
    case Errc::zero_mean_vector:
    case Errc::path_disagreement:
    case Errc::spectrum_outside_contour:
    case Errc::too_many_degenerate:
        return true;
    default:
        return false;
    }
}

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code)
    {
    }

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

} // namespace rmtlab
