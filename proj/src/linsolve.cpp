#include "bdfns/linsolve.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include <Eigen/LU>
#include <Eigen/SparseLU>

#include "bdfns/errors.hpp"

namespace bdfns {

namespace {

using ColMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;
using SparseSolver = Eigen::SparseLU<ColMatrix, Eigen::COLAMDOrdering<int>>;

double max_abs_entry(const SparseMatrix& a)
{
    double m = 0.0;
    for (int k = 0; k < a.nonZeros(); ++k) {
        m = std::max(m, std::abs(a.valuePtr()[k]));
    }
    return m;
}

bool same_pattern(const ColMatrix& a, const ColMatrix& b)
{
    if (a.rows() != b.rows() || a.cols() != b.cols() || a.nonZeros() != b.nonZeros()) {
        return false;
    }
    return std::equal(a.outerIndexPtr(), a.outerIndexPtr() + a.outerSize() + 1, b.outerIndexPtr()) &&
           std::equal(a.innerIndexPtr(), a.innerIndexPtr() + a.nonZeros(), b.innerIndexPtr());
}

} // namespace

struct LuFactorization::Impl {
    LuBackend backend;
    SparseMatrix matrix;
    ColMatrix pattern;
    std::optional<SparseSolver> sparse;
    std::optional<Eigen::PartialPivLU<Eigen::MatrixXd>> dense;

    void factor(const SparseMatrix& a)
    {
        if (a.rows() != a.cols()) {
            throw std::invalid_argument("LuFactorization: matrix must be square");
        }
        matrix = a;
        matrix.makeCompressed();
        const double scale = max_abs_entry(matrix);
        if (scale == 0.0) {
            throw SingularMatrixError("LuFactorization: zero matrix");
        }
        const double threshold = kSingularPivotTolerance * scale;

        if (backend == LuBackend::Dense) {
            if (a.rows() > kDenseLimit) {
                throw std::invalid_argument("LuFactorization: dense backend limited to " +
                                            std::to_string(kDenseLimit) + " unknowns");
            }
            dense.emplace(Eigen::MatrixXd(matrix));
            const auto& lu = dense->matrixLU();
            for (Eigen::Index i = 0; i < lu.rows(); ++i) {
                if (!(std::abs(lu(i, i)) >= threshold)) {
                    throw SingularMatrixError("LuFactorization: pivot " + std::to_string(i) +
                                              " below singularity threshold");
                }
            }
            return;
        }

        ColMatrix col(matrix);
        col.makeCompressed();
        if (!sparse || !same_pattern(col, pattern)) {
            sparse.emplace();
            sparse->analyzePattern(col);
            pattern = col;
        }
        sparse->factorize(col);
        if (sparse->info() != Eigen::Success) {
            throw SingularMatrixError("LuFactorization: " + sparse->lastErrorMessage());
        }
        // The diagonal of U is stored with the supernodes of L.
        using Supernodal = std::remove_cvref_t<decltype(sparse->matrixL().m_mapL)>;
        const auto& lstore = sparse->matrixL().m_mapL;
        for (Eigen::Index j = 0; j < col.cols(); ++j) {
            for (typename Supernodal::InnerIterator it(lstore, j); it; ++it) {
                if (it.index() == j) {
                    if (!(std::abs(it.value()) >= threshold)) {
                        throw SingularMatrixError("LuFactorization: pivot " + std::to_string(j) +
                                                  " below singularity threshold");
                    }
                    break;
                }
            }
        }
    }
};

LuFactorization::LuFactorization(const SparseMatrix& matrix, LuBackend backend)
    : impl_(std::make_unique<Impl>())
{
    impl_->backend = backend;
    impl_->factor(matrix);
}

LuFactorization::~LuFactorization() = default;
LuFactorization::LuFactorization(LuFactorization&&) noexcept = default;
LuFactorization& LuFactorization::operator=(LuFactorization&&) noexcept = default;

void LuFactorization::refactorize(const SparseMatrix& matrix)
{
    if (matrix.rows() != impl_->matrix.rows()) {
        throw std::invalid_argument("LuFactorization::refactorize: dimension changed");
    }
    impl_->factor(matrix);
}

Vector LuFactorization::solve(const Vector& rhs) const
{
    if (rhs.size() != impl_->matrix.rows()) {
        throw std::invalid_argument("LuFactorization::solve: right-hand side has wrong length");
    }
    if (impl_->backend == LuBackend::Dense) {
        return impl_->dense->solve(rhs);
    }
    Vector x = impl_->sparse->solve(rhs);
    return x;
}

double LuFactorization::relative_residual(const Vector& x, const Vector& rhs) const
{
    const double bn = rhs.norm();
    const double rn = (impl_->matrix * x - rhs).norm();
    if (bn == 0.0) {
        return rn;
    }
    return rn / bn;
}

Eigen::Index LuFactorization::size() const noexcept
{
    return impl_->matrix.rows();
}

LuBackend LuFactorization::backend() const noexcept
{
    return impl_->backend;
}

SparseMatrix BlockSystem::assemble() const
{
    const Eigen::Index nu = n_u();
    const Eigen::Index np = n_p();
    const auto& mask = *dirichlet;
    const auto fixed = [&](Eigen::Index i) { return mask[static_cast<std::size_t>(i)]; };

    std::vector<Eigen::Triplet<double, int>> trip;
    trip.reserve(static_cast<std::size_t>(velocity_block.nonZeros() + 2 * divergence->nonZeros() +
                                          2 * np + nu));
    for (Eigen::Index r = 0; r < nu; ++r) {
        if (fixed(r)) {
            trip.emplace_back(static_cast<int>(r), static_cast<int>(r), 1.0);
            continue;
        }
        for (SparseMatrix::InnerIterator it(velocity_block, r); it; ++it) {
            if (!fixed(it.col())) {
                trip.emplace_back(static_cast<int>(r), static_cast<int>(it.col()), it.value());
            }
        }
    }
    for (Eigen::Index k = 0; k < np; ++k) {
        const int row = static_cast<int>(nu + k);
        for (SparseMatrix::InnerIterator it(*divergence, k); it; ++it) {
            if (fixed(it.col())) {
                continue;
            }
            trip.emplace_back(row, static_cast<int>(it.col()), -it.value());
            trip.emplace_back(static_cast<int>(it.col()), row, -it.value());
        }
        const int last = static_cast<int>(nu + np);
        trip.emplace_back(row, last, (*pressure_mean)(k));
        trip.emplace_back(last, row, (*pressure_mean)(k));
    }
    SparseMatrix a(size(), size());
    a.setFromTriplets(trip.begin(), trip.end());
    a.makeCompressed();
    return a;
}

} // namespace bdfns
