#include "edcnn/factorization.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "edcnn/errors.hpp"

namespace edcnn {

namespace {

using Complex = std::complex<double>;

// One irreducible real factor of the symbol polynomial: (z - r) or (z - r)(z - conj r).
struct RootTerm {
    Complex root;
    bool pair = false;
    std::size_t degree() const { return pair ? 2 : 1; }
};

// Eigenvalues of the companion matrix of the monic polynomial q / q_n.
std::vector<Complex> polynomial_roots(std::span<const double> q) {
    const auto n = static_cast<Eigen::Index>(q.size() - 1);
    const double lead = q.back();
    Matrix companion = Matrix::Zero(n, n);
    for (Eigen::Index i = 1; i < n; ++i) companion(i, i - 1) = 1.0;
    for (Eigen::Index i = 0; i < n; ++i) companion(i, n - 1) = -q[static_cast<std::size_t>(i)] / lead;
    Eigen::EigenSolver<Matrix> solver(companion, false);
    if (solver.info() != Eigen::Success) throw NumericalFailure("factorize_filter: eigenvalue iteration failed");
    std::vector<Complex> roots;
    roots.reserve(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) roots.push_back(solver.eigenvalues()(i));
    return roots;
}

bool by_magnitude_then_angle(const Complex& a, const Complex& b) {
    const double ma = std::abs(a), mb = std::abs(b);
    if (ma != mb) return ma < mb;
    return std::arg(a) < std::arg(b);
}

// Splits roots into real terms and conjugate-pair terms. Eigenvalues of a real matrix come in
// exact conjugate pairs, but the pairing is done by nearest match so a residue can be reported.
std::vector<RootTerm> group_roots(std::vector<Complex> roots, double& residue) {
    std::sort(roots.begin(), roots.end(), by_magnitude_then_angle);
    std::vector<RootTerm> terms;
    std::vector<Complex> upper, lower;
    for (const auto& r : roots) {
        const double tol = 1e-12 * std::max(1.0, std::abs(r));
        if (std::abs(r.imag()) <= tol) {
            terms.push_back({Complex(r.real(), 0.0), false});
        } else if (r.imag() > 0) {
            upper.push_back(r);
        } else {
            lower.push_back(r);
        }
    }
    if (upper.size() != lower.size()) {
        throw NumericalFailure("factorize_filter: unmatched complex roots (" + std::to_string(upper.size()) +
                               " upper, " + std::to_string(lower.size()) + " lower)");
    }
    std::vector<bool> used(lower.size(), false);
    residue = 0.0;
    for (const auto& r : upper) {
        std::size_t best = lower.size();
        double best_dist = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < lower.size(); ++j) {
            if (used[j]) continue;
            const double dist = std::abs(std::conj(lower[j]) - r);
            if (dist < best_dist) {
                best_dist = dist;
                best = j;
            }
        }
        used[best] = true;
        const Complex l = lower[best];
        residue = std::max({residue, std::abs((r + l).imag()), std::abs((r * l).imag())});
        terms.push_back({r, true});
    }
    return terms;
}

// Leja order: start from the largest root, then repeatedly take the term whose root
// maximizes the product of distances to every root already taken.
std::vector<RootTerm> leja_order(std::vector<RootTerm> terms) {
    std::stable_sort(terms.begin(), terms.end(),
                     [](const RootTerm& a, const RootTerm& b) { return by_magnitude_then_angle(a.root, b.root); });
    const std::size_t n = terms.size();
    std::vector<RootTerm> ordered;
    ordered.reserve(n);
    std::vector<bool> taken(n, false);
    std::vector<double> score(n, 0.0);  // sum of log distances to taken roots

    auto take = [&](std::size_t idx) {
        taken[idx] = true;
        ordered.push_back(terms[idx]);
        const Complex z = terms[idx].root;
        for (std::size_t j = 0; j < n; ++j) {
            if (taken[j]) continue;
            const Complex c = terms[j].root;
            score[j] += std::log(std::max(std::abs(c - z), 1e-300));
            if (terms[idx].pair) score[j] += std::log(std::max(std::abs(c - std::conj(z)), 1e-300));
        }
    };

    if (n == 0) return ordered;
    take(n - 1);  // largest magnitude
    while (ordered.size() < n) {
        std::size_t best = n;
        for (std::size_t j = 0; j < n; ++j) {
            if (taken[j]) continue;
            if (best == n || score[j] > score[best]) best = j;
        }
        take(best);
    }
    return ordered;
}

// Multiplies an ascending coefficient array by a real term.
void multiply_term(std::vector<double>& poly, const RootTerm& term) {
    std::vector<double> factor;
    if (term.pair) {
        factor = {std::norm(term.root), -2.0 * term.root.real(), 1.0};
    } else {
        factor = {-term.root.real(), 1.0};
    }
    std::vector<double> out(poly.size() + factor.size() - 1, 0.0);
    for (std::size_t i = 0; i < poly.size(); ++i) {
        for (std::size_t j = 0; j < factor.size(); ++j) out[i + j] += poly[i] * factor[j];
    }
    poly = std::move(out);
}

double relative_error(const Filter& approx, const Filter& exact) {
    const std::size_t n = std::max(approx.bound(), exact.bound()) + 1;
    double diff = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const auto i = static_cast<std::ptrdiff_t>(k);
        diff = std::max(diff, std::abs(approx[i] - exact[i]));
    }
    return diff / exact.max_norm();
}

}  // namespace

FactorizationResult factorize_filter(const Filter& u, std::size_t s) {
    if (s < 2) throw InvalidArgument("factorize_filter: s must be at least 2");
    if (u.is_zero()) throw InvalidArgument("factorize_filter: zero filter has no factorization");

    const Filter target = u.trimmed();
    const std::size_t S = target.bound();
    FactorizationResult result;
    if (S <= s) {
        result.factors.push_back(target);
        return result;
    }

    auto coeffs = target.coeffs();
    std::size_t first_nonzero = 0;
    while (coeffs[first_nonzero] == 0.0) ++first_nonzero;
    std::span<const double> q = coeffs.subspan(first_nonzero);

    std::vector<RootTerm> terms;
    if (q.size() > 1) terms = group_roots(polynomial_roots(q), result.imaginary_residue);
    terms = leja_order(std::move(terms));
    // Leading zeros of u are roots at the origin; they pack like any other linear term.
    terms.insert(terms.end(), first_nonzero, RootTerm{Complex(0.0, 0.0), false});

    std::vector<std::vector<double>> polys;
    std::size_t current_degree = s + 1;
    for (const auto& term : terms) {
        if (current_degree + term.degree() > s) {
            polys.push_back({1.0});
            current_degree = 0;
        }
        multiply_term(polys.back(), term);
        current_degree += term.degree();
    }
    for (double& c : polys.front()) c *= q.back();

    for (auto& p : polys) result.factors.emplace_back(std::move(p));
    result.reconstruction_error = relative_error(reconstruct(result.factors), target);

    const std::size_t depth = result.factors.size();
    if ((depth - 1) * (s - 1) >= S) {
        throw NumericalFailure("factorize_filter: packing produced " + std::to_string(depth) +
                               " factors, above the bound for S=" + std::to_string(S));
    }
    if (!(result.reconstruction_error <= kFactorizationTolerance)) {
        std::ostringstream msg;
        msg << "factorize_filter: reconstruction error " << result.reconstruction_error << " exceeds "
            << kFactorizationTolerance << " (S=" << S << ", s=" << s << ", factors=" << depth
            << ", imaginary residue=" << result.imaginary_residue << ")";
        throw NumericalFailure(msg.str());
    }
    return result;
}

Filter reconstruct(std::span<const Filter> factors) {
    if (factors.empty()) throw InvalidArgument("reconstruct: empty factor list");
    Filter acc = factors.front();
    for (std::size_t i = 1; i < factors.size(); ++i) acc = convolve(factors[i], acc);
    return acc;
}

FactorizationResult pad_with_deltas(FactorizationResult result, std::size_t target) {
    if (target < result.depth()) {
        throw InvalidArgument("pad_with_deltas: target depth " + std::to_string(target) + " below " +
                              std::to_string(result.depth()));
    }
    while (result.factors.size() < target) result.factors.push_back(Filter::delta());
    return result;
}

}  // namespace edcnn
