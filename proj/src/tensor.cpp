#include "lightmpo/tensor.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include <fmt/format.h>

namespace lightmpo {

namespace {

Index product(const std::vector<Index>& extents) {
    return std::accumulate(extents.begin(), extents.end(), Index{1}, std::multiplies<>());
}

template <typename Scalar>
using RowMat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace

template <typename Scalar>
DenseTensor<Scalar>::DenseTensor(Shape shape) : shape_(std::move(shape)) {
    for (Index e : shape_)
        if (e <= 0) throw RankError("tensor extents must be positive");
    entries_ = Vec<Scalar>::Zero(product(shape_));
}

template <typename Scalar>
DenseTensor<Scalar>::DenseTensor(Shape shape, Vec<Scalar> entries)
    : shape_(std::move(shape)), entries_(std::move(entries)) {
    for (Index e : shape_)
        if (e <= 0) throw RankError("tensor extents must be positive");
    if (entries_.size() != product(shape_))
        throw RankError(fmt::format("entry count {} does not match shape product {}", entries_.size(),
                                    product(shape_)));
}

template <typename Scalar>
DenseTensor<Scalar> DenseTensor<Scalar>::from_matrix(const Mat<Scalar>& m) {
    Vec<Scalar> e(m.size());
    Eigen::Map<RowMat<Scalar>>(e.data(), m.rows(), m.cols()) = m;
    return DenseTensor({m.rows(), m.cols()}, std::move(e));
}

template <typename Scalar>
Index DenseTensor<Scalar>::offset(std::initializer_list<Index> idx) const {
    if (static_cast<Index>(idx.size()) != rank()) throw RankError("index count does not match tensor rank");
    Index off = 0;
    std::size_t axis = 0;
    for (Index i : idx) off = off * shape_[axis++] + i;
    return off;
}

template <typename Scalar>
DenseTensor<Scalar> DenseTensor<Scalar>::reshaped(Shape shape) const {
    return DenseTensor(std::move(shape), entries_);
}

template <typename Scalar>
DenseTensor<Scalar> DenseTensor<Scalar>::permuted(std::span<const int> perm) const {
    const std::size_t r = shape_.size();
    if (perm.size() != r) throw RankError("permutation length does not match tensor rank");
    std::vector<Index> in_stride(r, 1);
    for (std::size_t k = r; k-- > 1;) in_stride[k - 1] = in_stride[k] * shape_[k];

    Shape out_shape(r);
    std::vector<Index> stride(r);
    std::vector<bool> seen(r, false);
    for (std::size_t k = 0; k < r; ++k) {
        const auto p = static_cast<std::size_t>(perm[k]);
        if (p >= r || seen[p]) throw RankError("invalid permutation");
        seen[p] = true;
        out_shape[k] = shape_[p];
        stride[k] = in_stride[p];
    }

    Vec<Scalar> out(entries_.size());
    if (r == 0) {
        out = entries_;
        return DenseTensor(out_shape, std::move(out));
    }
    // Odometer over the output index, tracking the matching input offset.
    std::vector<Index> idx(r, 0);
    Index src = 0;
    const Index total = entries_.size();
    const Index inner = out_shape[r - 1];
    const Index inner_stride = stride[r - 1];
    for (Index dst = 0; dst < total; dst += inner) {
        for (Index j = 0; j < inner; ++j) out[dst + j] = entries_[src + j * inner_stride];
        for (std::size_t k = r - 1; k-- > 0;) {
            if (++idx[k] < out_shape[k]) {
                src += stride[k];
                break;
            }
            src -= (out_shape[k] - 1) * stride[k];
            idx[k] = 0;
        }
    }
    return DenseTensor(std::move(out_shape), std::move(out));
}

template <typename Scalar>
Mat<Scalar> DenseTensor<Scalar>::as_matrix(Index row_axes) const {
    if (row_axes < 0 || row_axes > rank()) throw RankError("row axis count out of range");
    Index rows = 1;
    for (Index k = 0; k < row_axes; ++k) rows *= shape_[static_cast<std::size_t>(k)];
    const Index cols = rows == 0 ? 0 : entries_.size() / rows;
    return Eigen::Map<const RowMat<Scalar>>(entries_.data(), rows, cols);
}

template <typename Scalar>
DenseTensor<Scalar> DenseTensor<Scalar>::conj() const {
    return DenseTensor(shape_, entries_.conjugate());
}

ContractionSpec ContractionSpec::parse(std::string_view expr) {
    ContractionSpec spec;
    const auto arrow = expr.find("->");
    if (arrow == std::string_view::npos) throw ContractionError(fmt::format("missing '->' in '{}'", expr));
    auto strip = [](std::string_view s) {
        std::string out;
        for (char c : s)
            if (c != ' ') out.push_back(c);
        return out;
    };
    std::string_view lhs = expr.substr(0, arrow);
    std::size_t start = 0;
    while (true) {
        const auto comma = lhs.find(',', start);
        spec.inputs.push_back(strip(lhs.substr(start, comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    spec.output = strip(expr.substr(arrow + 2));
    return spec;
}

namespace {

template <typename Scalar>
struct Operand {
    DenseTensor<Scalar> tensor;
    std::string labels;
};

template <typename Scalar>
Operand<Scalar> contract_pair(const Operand<Scalar>& a, const Operand<Scalar>& b) {
    std::string shared, afree, bfree;
    for (char c : a.labels) (b.labels.find(c) != std::string::npos ? shared : afree).push_back(c);
    for (char c : b.labels)
        if (a.labels.find(c) == std::string::npos) bfree.push_back(c);

    std::vector<int> pa, pb;
    for (char c : afree) pa.push_back(static_cast<int>(a.labels.find(c)));
    for (char c : shared) pa.push_back(static_cast<int>(a.labels.find(c)));
    for (char c : shared) pb.push_back(static_cast<int>(b.labels.find(c)));
    for (char c : bfree) pb.push_back(static_cast<int>(b.labels.find(c)));

    const auto ta = a.tensor.permuted(pa);
    const auto tb = b.tensor.permuted(pb);
    const auto na = static_cast<Index>(afree.size());
    const auto ns = static_cast<Index>(shared.size());

    typename DenseTensor<Scalar>::Shape shape;
    for (Index k = 0; k < na; ++k) shape.push_back(ta.extent(k));
    for (Index k = ns; k < tb.rank(); ++k) shape.push_back(tb.extent(k));

    Index rows = 1, inner = 1, cols = 1;
    for (Index k = 0; k < na; ++k) rows *= ta.extent(k);
    for (Index k = 0; k < ns; ++k) inner *= tb.extent(k);
    for (Index k = ns; k < tb.rank(); ++k) cols *= tb.extent(k);

    Eigen::Map<const RowMat<Scalar>> ma(ta.entries().data(), rows, inner);
    Eigen::Map<const RowMat<Scalar>> mb(tb.entries().data(), inner, cols);
    Vec<Scalar> out(rows * cols);
    Eigen::Map<RowMat<Scalar>>(out.data(), rows, cols).noalias() = ma * mb;
    return {DenseTensor<Scalar>(std::move(shape), std::move(out)), afree + bfree};
}

template <typename Scalar>
Index result_size(const Operand<Scalar>& a, const Operand<Scalar>& b) {
    Index size = 1;
    for (std::size_t k = 0; k < a.labels.size(); ++k)
        if (b.labels.find(a.labels[k]) == std::string::npos) size *= a.tensor.extent(static_cast<Index>(k));
    for (std::size_t k = 0; k < b.labels.size(); ++k)
        if (a.labels.find(b.labels[k]) == std::string::npos) size *= b.tensor.extent(static_cast<Index>(k));
    return size;
}

bool shares_label(const std::string& a, const std::string& b) {
    return std::any_of(a.begin(), a.end(), [&](char c) { return b.find(c) != std::string::npos; });
}

}  // namespace

template <typename Scalar>
DenseTensor<Scalar> contract(const std::vector<const DenseTensor<Scalar>*>& tensors, const ContractionSpec& spec,
                             std::string_view order) {
    if (tensors.empty()) throw ContractionError("no operands");
    if (tensors.size() != spec.inputs.size())
        throw ContractionError(
            fmt::format("{} operands but {} label groups", tensors.size(), spec.inputs.size()));

    std::map<char, std::pair<int, Index>> seen;  // label -> (count, extent)
    for (std::size_t t = 0; t < tensors.size(); ++t) {
        const auto& labels = spec.inputs[t];
        if (static_cast<Index>(labels.size()) != tensors[t]->rank())
            throw ContractionError(fmt::format("operand {} has rank {} but {} labels", t, tensors[t]->rank(),
                                               labels.size()));
        for (std::size_t k = 0; k < labels.size(); ++k) {
            const char c = labels[k];
            if (labels.find(c) != k) throw ContractionError(fmt::format("label '{}' repeated in operand {}", c, t));
            const Index e = tensors[t]->extent(static_cast<Index>(k));
            auto [it, inserted] = seen.try_emplace(c, 0, e);
            if (!inserted && it->second.second != e)
                throw ContractionError(fmt::format("label '{}' has mismatched extents {} and {}", c,
                                                   it->second.second, e));
            ++it->second.first;
        }
    }
    for (char c : spec.output) {
        auto it = seen.find(c);
        if (it == seen.end() || it->second.first != 1)
            throw ContractionError(fmt::format("output label '{}' must appear exactly once in the operands", c));
        if (std::count(spec.output.begin(), spec.output.end(), c) != 1)
            throw ContractionError(fmt::format("output label '{}' repeated", c));
    }
    for (const auto& [c, info] : seen) {
        if (info.first > 2) throw ContractionError(fmt::format("label '{}' appears more than twice", c));
        if (info.first == 1 && spec.output.find(c) == std::string::npos)
            throw ContractionError(fmt::format("label '{}' is neither summed nor in the output", c));
    }

    std::vector<Operand<Scalar>> work;
    work.reserve(tensors.size());
    for (std::size_t t = 0; t < tensors.size(); ++t) work.push_back({*tensors[t], spec.inputs[t]});

    auto merge = [&work](std::size_t i, std::size_t j) {
        if (i > j) std::swap(i, j);
        auto merged = contract_pair(work[i], work[j]);
        work.erase(work.begin() + static_cast<std::ptrdiff_t>(j));
        work[i] = std::move(merged);
    };

    for (char c : order) {
        std::vector<std::size_t> holders;
        for (std::size_t i = 0; i < work.size(); ++i)
            if (work[i].labels.find(c) != std::string::npos) holders.push_back(i);
        if (holders.size() == 2) merge(holders[0], holders[1]);
        else if (holders.size() > 2) throw ContractionError(fmt::format("label '{}' held by >2 operands", c));
    }

    while (work.size() > 1) {
        std::size_t bi = 0, bj = 1;
        Index best = -1;
        bool best_shared = false;
        for (std::size_t i = 0; i < work.size(); ++i) {
            for (std::size_t j = i + 1; j < work.size(); ++j) {
                const bool sh = shares_label(work[i].labels, work[j].labels);
                const Index sz = result_size(work[i], work[j]);
                if ((sh && !best_shared) || (sh == best_shared && (best < 0 || sz < best))) {
                    best = sz;
                    best_shared = sh;
                    bi = i;
                    bj = j;
                }
            }
        }
        merge(bi, bj);
    }

    auto& last = work.front();
    std::vector<int> perm;
    for (char c : spec.output) perm.push_back(static_cast<int>(last.labels.find(c)));
    if (last.tensor.rank() == 0) return last.tensor;
    return last.tensor.permuted(perm);
}

template <typename Scalar>
SvdResult<Scalar> svd(const Mat<Scalar>& m) {
    if (!m.allFinite()) throw NumericError("svd input has non-finite entries");
    Eigen::BDCSVD<Mat<Scalar>> dec(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (dec.info() != Eigen::Success) throw NumericError("svd did not converge");
    return {dec.matrixU(), dec.singularValues(), dec.matrixV()};
}

template <typename Scalar>
SvdResult<Scalar> svd(const DenseTensor<Scalar>& m) {
    if (m.rank() != 2) throw RankError(fmt::format("svd needs a matrix, got rank {}", m.rank()));
    return svd<Scalar>(m.as_matrix(1));
}

template <typename Scalar>
LstsqResult<Scalar> min_norm_lstsq(const Mat<Scalar>& a, const Vec<Scalar>& b, double rank_tol) {
    if (a.rows() != b.size()) throw RankError("lstsq: row count does not match right-hand side");
    if (!(rank_tol > 0)) throw std::invalid_argument("lstsq: rank_tol must be positive");
    LstsqResult<Scalar> res;
    res.x = Vec<Scalar>::Zero(a.cols());
    if (a.size() == 0) {
        res.rank_deficient = a.cols() > 0;
        return res;
    }
    const auto dec = svd<Scalar>(a);
    const double cutoff = rank_tol * dec.S(0);
    Index r = 0;
    while (r < dec.S.size() && dec.S(r) > cutoff) ++r;
    res.rank = r;
    res.rank_deficient = r < a.cols();
    if (r == 0) return res;
    Vec<Scalar> coef = dec.U.leftCols(r).adjoint() * b;
    coef.array() /= dec.S.head(r).array().template cast<Scalar>();
    res.x = dec.V.leftCols(r) * coef;
    return res;
}

template <typename Scalar>
LstsqResult<Scalar> min_norm_lstsq_selfadjoint(const Mat<Scalar>& a, const Vec<Scalar>& b, double rank_tol) {
    if (a.rows() != b.size() || a.rows() != a.cols())
        throw RankError("lstsq: self-adjoint system must be square and match the right-hand side");
    if (!(rank_tol > 0)) throw std::invalid_argument("lstsq: rank_tol must be positive");
    if (!a.allFinite()) throw NumericError("lstsq: non-finite matrix");
    LstsqResult<Scalar> res;
    res.x = Vec<Scalar>::Zero(a.cols());
    if (a.size() == 0) return res;
    Eigen::SelfAdjointEigenSolver<Mat<Scalar>> eig(a);
    if (eig.info() != Eigen::Success) throw NumericError("eigensolver did not converge");
    const Eigen::VectorXd mag = eig.eigenvalues().cwiseAbs();
    const double cutoff = rank_tol * mag.maxCoeff();
    Vec<Scalar> coef = eig.eigenvectors().adjoint() * b;
    for (Index k = 0; k < mag.size(); ++k) {
        if (mag(k) > cutoff) {
            coef(k) /= eig.eigenvalues()(k);
            ++res.rank;
        } else {
            coef(k) = Scalar(0);
        }
    }
    res.rank_deficient = res.rank < a.cols();
    res.x = eig.eigenvectors() * coef;
    return res;
}

template <typename Scalar>
double trace_norm(const Mat<Scalar>& m) {
    if (m.size() == 0) return 0.0;
    return svd<Scalar>(m).S.sum();
}

#define LIGHTMPO_INSTANTIATE(S)                                                                              \
    template class DenseTensor<S>;                                                                           \
    template DenseTensor<S> contract<S>(const std::vector<const DenseTensor<S>*>&, const ContractionSpec&,    \
                                        std::string_view);                                                   \
    template SvdResult<S> svd<S>(const Mat<S>&);                                                             \
    template SvdResult<S> svd<S>(const DenseTensor<S>&);                                                     \
    template LstsqResult<S> min_norm_lstsq<S>(const Mat<S>&, const Vec<S>&, double);                         \
    template LstsqResult<S> min_norm_lstsq_selfadjoint<S>(const Mat<S>&, const Vec<S>&, double);             \
    template double trace_norm<S>(const Mat<S>&);

LIGHTMPO_INSTANTIATE(double)
LIGHTMPO_INSTANTIATE(cplx)

#undef LIGHTMPO_INSTANTIATE

}  // namespace lightmpo
