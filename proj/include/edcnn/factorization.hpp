#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "edcnn/conv.hpp"

namespace edcnn {

struct FactorizationResult {
    /// factors[0] is applied first. Every factor has bound <= s.
    std::vector<Filter> factors;
    /// max|reconstruct(factors) - u| / max|u|
    double reconstruction_error = 0.0;
    /// Largest imaginary part left in a conjugate-pair quadratic before it is taken as real.
    double imaginary_residue = 0.0;

    std::size_t depth() const noexcept { return factors.size(); }
};

/// Relative reconstruction error above which factorize_filter throws NumericalFailure.
inline constexpr double kFactorizationTolerance = 1e-6;

/// Writes u as a convolution of filters supported on {0, ..., s}, using fewer than
/// S/(s-1) + 1 factors where S is the effective bound of u.
///
/// Roots of the symbol polynomial sum_k u_k z^k come from the eigenvalues of its companion
/// matrix. Conjugate pairs become real quadratics, real roots (and the roots at zero that
/// leading zero coefficients stand for) become linear terms. The terms are put in Leja order,
/// so every prefix of the factor chain has well spread roots and moderate coefficients, then
/// packed first-fit into factors of degree <= s. The leading coefficient of u goes into the
/// first factor. When S <= s the trimmed filter is returned as the only factor.
///
/// Throws InvalidArgument for the zero filter or s < 2, and NumericalFailure when the
/// reconstruction error exceeds kFactorizationTolerance.
FactorizationResult factorize_filter(const Filter& u, std::size_t s);

/// Convolution product of all factors; the bound is the sum of the factor bounds.
Filter reconstruct(std::span<const Filter> factors);

/// Appends delta factors until there are exactly `target` of them.
FactorizationResult pad_with_deltas(FactorizationResult result, std::size_t target);

}  // namespace edcnn
