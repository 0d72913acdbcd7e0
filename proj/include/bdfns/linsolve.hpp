#pragma once

// Sparse storage and direct LU solves for the saddle-point systems.

#include <memory>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace bdfns {

using Vector = Eigen::VectorXd;

/// Compressed sparse row matrix. After `makeCompressed()` (which
/// `setFromTriplets` implies) column indices are strictly increasing within each
/// row and duplicates have been summed.
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor, int>;

enum class LuBackend {
    /// Supernodal LU with partial pivoting and a COLAMD fill-reducing ordering.
    Sparse,
    /// Dense LU with partial pivoting; only for systems below kDenseLimit unknowns.
    Dense,
};

inline constexpr Eigen::Index kDenseLimit = 2000;

/// Relative threshold below which a pivot is treated as zero.
inline constexpr double kSingularPivotTolerance = 1e-14;

/// Reusable LU factorization of a square matrix.
///
/// Solves are const and may run concurrently against one factorization.
/// Throws SingularMatrixError if any pivot satisfies
/// |pivot| < kSingularPivotTolerance * max|a_ij|.
class LuFactorization {
public:
    explicit LuFactorization(const SparseMatrix& matrix, LuBackend backend = LuBackend::Sparse);
    ~LuFactorization();
    LuFactorization(LuFactorization&&) noexcept;
    LuFactorization& operator=(LuFactorization&&) noexcept;

    /// Refactorizes a matrix with the same dimension; the fill-reducing
    /// ordering is reused when the sparsity pattern is unchanged.
    void refactorize(const SparseMatrix& matrix);

    [[nodiscard]] Vector solve(const Vector& rhs) const;

    /// ||A x - b||_2 / ||b||_2 (0 when b = 0).
    [[nodiscard]] double relative_residual(const Vector& x, const Vector& rhs) const;

    [[nodiscard]] Eigen::Index size() const noexcept;
    [[nodiscard]] LuBackend backend() const noexcept;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

inline LuFactorization factorize(const SparseMatrix& matrix, LuBackend backend = LuBackend::Sparse)
{
    return LuFactorization(matrix, backend);
}

inline Vector solve(const LuFactorization& lu, const Vector& rhs)
{
    return lu.solve(rhs);
}

/// Saddle-point matrix of one linearized step,
///
///     [ K    -B^T  0 ] [u]
///     [ -B    0    m ] [p]
///     [ 0     m^T  0 ] [lambda]
///
/// where m holds the integrals of the pressure basis, so the last row imposes a
/// zero-mean pressure. Rows and columns of Dirichlet velocity unknowns are
/// replaced by the identity.
struct BlockSystem {
    SparseMatrix velocity_block;            ///< K, n_u x n_u
    const SparseMatrix* divergence = nullptr; ///< B, n_p x n_u
    const Vector* pressure_mean = nullptr;   ///< m, length n_p
    const std::vector<bool>* dirichlet = nullptr;

    [[nodiscard]] Eigen::Index n_u() const { return velocity_block.rows(); }
    [[nodiscard]] Eigen::Index n_p() const { return divergence->rows(); }
    [[nodiscard]] Eigen::Index size() const { return n_u() + n_p() + 1; }

    [[nodiscard]] SparseMatrix assemble() const;
};

} // namespace bdfns
