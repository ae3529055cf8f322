// tensor.hpp: dense multi-index tensors, label-driven contraction and the
// SVD-based linear algebra used by every MPO routine.

#pragma once

#include <complex>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace lightmpo {

using cplx = std::complex<double>;
using Index = Eigen::Index;

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

struct ContractionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct RankError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Dense tensor with dynamic rank. Entries are stored in row-major logical
/// order: the last index runs fastest.
template <typename Scalar>
class DenseTensor {
public:
    using Shape = std::vector<Index>;

    DenseTensor() = default;
    explicit DenseTensor(Shape shape);
    DenseTensor(Shape shape, Vec<Scalar> entries);

    /// Rank-2 tensor holding the entries of m.
    static DenseTensor from_matrix(const Mat<Scalar>& m);

    const Shape& shape() const { return shape_; }
    Index rank() const { return static_cast<Index>(shape_.size()); }
    Index extent(Index axis) const { return shape_.at(static_cast<std::size_t>(axis)); }
    Index size() const { return entries_.size(); }

    const Vec<Scalar>& entries() const { return entries_; }
    Vec<Scalar>& entries() { return entries_; }

    Scalar& operator()(std::initializer_list<Index> idx) { return entries_[offset(idx)]; }
    const Scalar& operator()(std::initializer_list<Index> idx) const { return entries_[offset(idx)]; }

    DenseTensor reshaped(Shape shape) const;
    DenseTensor permuted(std::span<const int> perm) const;

    /// Matrix view with the first `row_axes` indices fused into rows.
    Mat<Scalar> as_matrix(Index row_axes) const;

    DenseTensor conj() const;
    bool all_finite() const { return entries_.allFinite(); }

    DenseTensor& operator*=(Scalar c) {
        entries_ *= c;
        return *this;
    }

private:
    Index offset(std::initializer_list<Index> idx) const;

    Shape shape_;
    Vec<Scalar> entries_;
};

template <typename Scalar>
DenseTensor<Scalar> operator*(Scalar c, DenseTensor<Scalar> t) {
    t *= c;
    return t;
}

/// Index labels per operand plus the ordered open labels of the result.
/// A label shared by two operands is summed; every open label appears once.
struct ContractionSpec {
    std::vector<std::string> inputs;
    std::string output;

    /// Parses "ab,bc->ac".
    static ContractionSpec parse(std::string_view expr);
};

/// Contracts all operands. `order` lists summed labels in the order they are
/// eliminated (ncon convention); when empty a greedy smallest-intermediate
/// pairing is used.
template <typename Scalar>
DenseTensor<Scalar> contract(const std::vector<const DenseTensor<Scalar>*>& tensors,
                             const ContractionSpec& spec, std::string_view order = {});

/// contract("la,lstr->atsr", a, b) with greedy ordering.
template <typename Scalar, typename... Rest>
DenseTensor<Scalar> contract(std::string_view expr, const DenseTensor<Scalar>& first, const Rest&... rest) {
    std::vector<const DenseTensor<Scalar>*> ptrs{&first, &rest...};
    return contract(ptrs, ContractionSpec::parse(expr));
}

template <typename Scalar>
struct SvdResult {
    Mat<Scalar> U;
    Eigen::VectorXd S;  // nonnegative, descending
    Mat<Scalar> V;      // m = U * S.asDiagonal() * V^dagger
};

template <typename Scalar>
SvdResult<Scalar> svd(const Mat<Scalar>& m);

template <typename Scalar>
SvdResult<Scalar> svd(const DenseTensor<Scalar>& m);

template <typename Scalar>
struct LstsqResult {
    Vec<Scalar> x;
    Index rank = 0;
    bool rank_deficient = false;
};

inline constexpr double kDefaultRankTol = 1e-7;

/// Least-squares solution of minimum 2-norm; singular values below
/// rank_tol * max(S) are discarded.
template <typename Scalar>
LstsqResult<Scalar> min_norm_lstsq(const Mat<Scalar>& a, const Vec<Scalar>& b,
                                   double rank_tol = kDefaultRankTol);

/// Same contract for a self-adjoint `a`, computed from its eigendecomposition.
template <typename Scalar>
LstsqResult<Scalar> min_norm_lstsq_selfadjoint(const Mat<Scalar>& a, const Vec<Scalar>& b,
                                               double rank_tol = kDefaultRankTol);

/// Sum of singular values.
template <typename Scalar>
double trace_norm(const Mat<Scalar>& m);

}  // namespace lightmpo
