// linalg.hpp
// Dense complex matrices for small quantum operators: Hermitian
// eigendecomposition, PSD square root, tensor products,
// partial trace, qubit permutations and the Pauli basis.
//
// Qubit convention: in a 2^n-dimensional space qubit 0 is the most
// significant bit of the basis index, so kron(A, B) puts A on qubit 0.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "qfid/errors.hpp"

namespace qfid {

using cplx = std::complex<double>;

class ComplexMatrix {
public:
    ComplexMatrix() = default;

    ComplexMatrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), data_(rows * cols) {}

    ComplexMatrix(std::size_t rows, std::size_t cols, std::vector<cplx> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (data_.size() != rows_ * cols_) {
            throw ValidationError("ComplexMatrix: data size does not match shape");
        }
    }

    ComplexMatrix(std::initializer_list<std::initializer_list<cplx>> rows) {
        rows_ = rows.size();
        cols_ = rows_ == 0 ? 0 : rows.begin()->size();
        data_.reserve(rows_ * cols_);
        for (const auto& r : rows) {
            if (r.size() != cols_) {
                throw ValidationError("ComplexMatrix: ragged initializer");
            }
            data_.insert(data_.end(), r.begin(), r.end());
        }
    }

    static ComplexMatrix identity(std::size_t n) {
        ComplexMatrix out(n, n);
        for (std::size_t i = 0; i < n; ++i) out(i, i) = 1.0;
        return out;
    }

    static ComplexMatrix diagonal(std::span<const double> values) {
        ComplexMatrix out(values.size(), values.size());
        for (std::size_t i = 0; i < values.size(); ++i) out(i, i) = values[i];
        return out;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool is_square() const noexcept { return rows_ == cols_; }

    cplx& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    const cplx& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    // Bounds-checked access.
    const cplx& at(std::size_t r, std::size_t c) const {
        if (r >= rows_ || c >= cols_) throw ValidationError("ComplexMatrix::at out of range");
        return (*this)(r, c);
    }

    std::span<cplx> data() noexcept { return data_; }
    std::span<const cplx> data() const noexcept { return data_; }

    ComplexMatrix adjoint() const {
        ComplexMatrix out(cols_, rows_);
        for (std::size_t r = 0; r < rows_; ++r)
            for (std::size_t c = 0; c < cols_; ++c) out(c, r) = std::conj((*this)(r, c));
        return out;
    }

    ComplexMatrix transpose() const {
        ComplexMatrix out(cols_, rows_);
        for (std::size_t r = 0; r < rows_; ++r)
            for (std::size_t c = 0; c < cols_; ++c) out(c, r) = (*this)(r, c);
        return out;
    }

    cplx trace() const {
        require_square("trace");
        cplx t = 0.0;
        for (std::size_t i = 0; i < rows_; ++i) t += (*this)(i, i);
        return t;
    }

    // (M + M^dagger) / 2
    ComplexMatrix hermitian_part() const {
        require_square("hermitian_part");
        ComplexMatrix out(rows_, cols_);
        for (std::size_t r = 0; r < rows_; ++r)
            for (std::size_t c = 0; c < cols_; ++c)
                out(r, c) = 0.5 * ((*this)(r, c) + std::conj((*this)(c, r)));
        return out;
    }

    double max_abs() const {
        double m = 0.0;
        for (const auto& z : data_) m = std::max(m, std::abs(z));
        return m;
    }

    double frobenius_norm() const {
        double s = 0.0;
        for (const auto& z : data_) s += std::norm(z);
        return std::sqrt(s);
    }

    ComplexMatrix& operator+=(const ComplexMatrix& o) {
        require_same_shape(o, "+=");
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }
    ComplexMatrix& operator-=(const ComplexMatrix& o) {
        require_same_shape(o, "-=");
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
        return *this;
    }
    ComplexMatrix& operator*=(cplx s) {
        for (auto& z : data_) z *= s;
        return *this;
    }

    friend ComplexMatrix operator+(ComplexMatrix a, const ComplexMatrix& b) { return a += b; }
    friend ComplexMatrix operator-(ComplexMatrix a, const ComplexMatrix& b) { return a -= b; }
    friend ComplexMatrix operator*(ComplexMatrix a, cplx s) { return a *= s; }
    friend ComplexMatrix operator*(cplx s, ComplexMatrix a) { return a *= s; }

    friend ComplexMatrix operator*(const ComplexMatrix& a, const ComplexMatrix& b) {
        if (a.cols_ != b.rows_) throw ValidationError("ComplexMatrix product: dimension mismatch");
        ComplexMatrix out(a.rows_, b.cols_);
        for (std::size_t i = 0; i < a.rows_; ++i) {
            cplx* orow = &out.data_[i * b.cols_];
            for (std::size_t k = 0; k < a.cols_; ++k) {
                const cplx aik = a(i, k);
                if (aik == cplx{}) continue;
                const cplx* brow = &b.data_[k * b.cols_];
                for (std::size_t j = 0; j < b.cols_; ++j) orow[j] += aik * brow[j];
            }
        }
        return out;
    }

    friend bool operator==(const ComplexMatrix&, const ComplexMatrix&) = default;

private:
    void require_square(const char* what) const {
        if (!is_square()) throw ValidationError(std::string("ComplexMatrix::") + what + " needs a square matrix");
    }
    void require_same_shape(const ComplexMatrix& o, const char* what) const {
        if (rows_ != o.rows_ || cols_ != o.cols_)
            throw ValidationError(std::string("ComplexMatrix ") + what + ": shape mismatch");
    }

    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<cplx> data_;
};

// max_ij |a_ij - b_ij|
inline double max_abs_diff(const ComplexMatrix& a, const ComplexMatrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw ValidationError("max_abs_diff: shape mismatch");
    }
    double m = 0.0;
    auto da = a.data();
    auto db = b.data();
    for (std::size_t i = 0; i < da.size(); ++i) m = std::max(m, std::abs(da[i] - db[i]));
    return m;
}

// Tr(A B) without forming the product.
inline cplx trace_of_product(const ComplexMatrix& a, const ComplexMatrix& b) {
    if (a.cols() != b.rows() || a.rows() != b.cols()) {
        throw ValidationError("trace_of_product: dimension mismatch");
    }
    cplx t = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t k = 0; k < a.cols(); ++k) t += a(i, k) * b(k, i);
    return t;
}

inline bool is_power_of_two(std::size_t n) noexcept { return n != 0 && (n & (n - 1)) == 0; }

inline std::size_t qubit_count(std::size_t dim) {
    if (!is_power_of_two(dim)) throw ValidationError("dimension is not a power of two");
    std::size_t n = 0;
    while ((std::size_t{1} << n) < dim) ++n;
    return n;
}

// ---------------------------------------------------------------------------
// Pauli basis and the fixed two-qubit operators

// sigma_0 = I, sigma_1 = X, sigma_2 = Y, sigma_3 = Z.
inline ComplexMatrix pauli(int m) {
    using namespace std::complex_literals;
    switch (m) {
        case 0: return {{1.0, 0.0}, {0.0, 1.0}};
        case 1: return {{0.0, 1.0}, {1.0, 0.0}};
        case 2: return {{0.0, -1.0i}, {1.0i, 0.0}};
        case 3: return {{1.0, 0.0}, {0.0, -1.0}};
        default: throw ValidationError("pauli: index must be in 0..3, got " + std::to_string(m));
    }
}

// Projector onto |Psi-> = (|01> - |10>)/sqrt(2).
inline ComplexMatrix singlet_projector() {
    ComplexMatrix p(4, 4);
    p(1, 1) = 0.5;
    p(2, 2) = 0.5;
    p(1, 2) = -0.5;
    p(2, 1) = -0.5;
    return p;
}

// V = sum_m sigma_m (x) sigma_m = 2 I - 4 P- = 2 SWAP.
inline ComplexMatrix v_operator() {
    return 2.0 * ComplexMatrix::identity(4) - 4.0 * singlet_projector();
}

// ---------------------------------------------------------------------------
// Tensor structure

inline ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b) {
    ComplexMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (std::size_t ar = 0; ar < a.rows(); ++ar)
        for (std::size_t ac = 0; ac < a.cols(); ++ac) {
            const cplx s = a(ar, ac);
            if (s == cplx{}) continue;
            for (std::size_t br = 0; br < b.rows(); ++br)
                for (std::size_t bc = 0; bc < b.cols(); ++bc)
                    out(ar * b.rows() + br, ac * b.cols() + bc) = s * b(br, bc);
        }
    return out;
}

inline ComplexMatrix kron_all(std::initializer_list<ComplexMatrix> factors) {
    ComplexMatrix out = ComplexMatrix::identity(1);
    for (const auto& f : factors) out = kron(out, f);
    return out;
}

// Partial trace of an operator on subsystems with dimensions `dims`,
// keeping the subsystems listed in `keep` (in their original order).
inline ComplexMatrix partial_trace(const ComplexMatrix& m, std::span<const std::size_t> keep,
                                   std::span<const std::size_t> dims) {
    const std::size_t total =
        std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
    if (!m.is_square() || m.rows() != total) {
        throw ValidationError("partial_trace: matrix does not match subsystem dimensions");
    }
    const std::size_t n = dims.size();
    std::vector<bool> kept(n, false);
    for (std::size_t k : keep) {
        if (k >= n || kept[k]) throw ValidationError("partial_trace: invalid keep list");
        kept[k] = true;
    }
    std::vector<std::size_t> kept_ids, traced_ids;
    for (std::size_t i = 0; i < n; ++i) (kept[i] ? kept_ids : traced_ids).push_back(i);

    std::size_t keep_dim = 1, trace_dim = 1;
    for (auto i : kept_ids) keep_dim *= dims[i];
    for (auto i : traced_ids) trace_dim *= dims[i];

    // stride of subsystem i in the full row-major index
    std::vector<std::size_t> stride(n, 1);
    for (std::size_t i = n; i-- > 1;) stride[i - 1] = stride[i] * dims[i];

    auto full_index = [&](std::size_t kept_idx, std::size_t traced_idx) {
        std::size_t idx = 0;
        for (std::size_t j = kept_ids.size(); j-- > 0;) {
            const auto s = kept_ids[j];
            idx += (kept_idx % dims[s]) * stride[s];
            kept_idx /= dims[s];
        }
        for (std::size_t j = traced_ids.size(); j-- > 0;) {
            const auto s = traced_ids[j];
            idx += (traced_idx % dims[s]) * stride[s];
            traced_idx /= dims[s];
        }
        return idx;
    };

    ComplexMatrix out(keep_dim, keep_dim);
    for (std::size_t r = 0; r < keep_dim; ++r)
        for (std::size_t c = 0; c < keep_dim; ++c) {
            cplx s = 0.0;
            for (std::size_t t = 0; t < trace_dim; ++t) s += m(full_index(r, t), full_index(c, t));
            out(r, c) = s;
        }
    return out;
}

inline ComplexMatrix partial_trace(const ComplexMatrix& m, std::initializer_list<std::size_t> keep,
                                   std::initializer_list<std::size_t> dims) {
    return partial_trace(m, std::span(keep.begin(), keep.size()), std::span(dims.begin(), dims.size()));
}

namespace detail {

// Basis index map for a qubit permutation: output qubit k carries input qubit perm[k].
inline std::vector<std::size_t> permuted_indices(std::span<const std::size_t> perm) {
    const std::size_t n = perm.size();
    std::vector<bool> seen(n, false);
    for (auto p : perm) {
        if (p >= n || seen[p]) throw ValidationError("qubit permutation is not a permutation");
        seen[p] = true;
    }
    const std::size_t dim = std::size_t{1} << n;
    std::vector<std::size_t> map(dim);
    for (std::size_t in = 0; in < dim; ++in) {
        std::size_t out = 0;
        for (std::size_t k = 0; k < n; ++k) {
            const std::size_t bit = (in >> (n - 1 - perm[k])) & 1U;
            out |= bit << (n - 1 - k);
        }
        map[in] = out;
    }
    return map;
}

}  // namespace detail

// Reorders qubits: output qubit k is input qubit perm[k]. Equivalent to
// P M P^dagger with P the corresponding permutation matrix.
inline ComplexMatrix permute_qubits(const ComplexMatrix& m, std::span<const std::size_t> perm) {
    if (!m.is_square() || m.rows() != (std::size_t{1} << perm.size())) {
        throw ValidationError("permute_qubits: matrix dimension does not match permutation length");
    }
    const auto map = detail::permuted_indices(perm);
    ComplexMatrix out(m.rows(), m.cols());
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c) out(map[r], map[c]) = m(r, c);
    return out;
}

inline ComplexMatrix permute_qubits(const ComplexMatrix& m, std::initializer_list<std::size_t> perm) {
    return permute_qubits(m, std::span(perm.begin(), perm.size()));
}

// Permutation matrix of a qubit reordering (see permute_qubits).
inline ComplexMatrix permutation_operator(std::span<const std::size_t> perm) {
    const auto map = detail::permuted_indices(perm);
    ComplexMatrix out(map.size(), map.size());
    for (std::size_t in = 0; in < map.size(); ++in) out(map[in], in) = 1.0;
    return out;
}

// SWAP of qubits i and j in an n-qubit register.
inline ComplexMatrix swap_operator(std::size_t i, std::size_t j, std::size_t n_qubits) {
    if (i >= n_qubits || j >= n_qubits) throw ValidationError("swap_operator: qubit index out of range");
    std::vector<std::size_t> perm(n_qubits);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::swap(perm[i], perm[j]);
    return permutation_operator(perm);
}

// Operator `op` on `targets` (in that order) of an n-qubit register, identity elsewhere.
inline ComplexMatrix embed(const ComplexMatrix& op, std::span<const std::size_t> targets, std::size_t n_qubits) {
    if (op.rows() != (std::size_t{1} << targets.size()) || !op.is_square()) {
        throw ValidationError("embed: operator size does not match target count");
    }
    std::vector<std::size_t> order(targets.begin(), targets.end());
    std::vector<bool> used(n_qubits, false);
    for (auto t : order) {
        if (t >= n_qubits || used[t]) throw ValidationError("embed: invalid target list");
        used[t] = true;
    }
    for (std::size_t q = 0; q < n_qubits; ++q)
        if (!used[q]) order.push_back(q);
    const ComplexMatrix local =
        kron(op, ComplexMatrix::identity(std::size_t{1} << (n_qubits - targets.size())));
    // local lives in the `order` arrangement; move qubit order[k] back to its slot
    std::vector<std::size_t> back(n_qubits);
    for (std::size_t k = 0; k < n_qubits; ++k) back[order[k]] = k;
    return permute_qubits(local, back);
}

inline ComplexMatrix embed(const ComplexMatrix& op, std::initializer_list<std::size_t> targets,
                           std::size_t n_qubits) {
    return embed(op, std::span(targets.begin(), targets.size()), n_qubits);
}

// ---------------------------------------------------------------------------
// Hermitian eigenproblem

struct EigDecomposition {
    std::vector<double> eigenvalues;  // ascending
    ComplexMatrix eigenvectors;       // unitary, column i belongs to eigenvalue i

    ComplexMatrix reconstruct() const {
        ComplexMatrix scaled = eigenvectors;
        for (std::size_t r = 0; r < scaled.rows(); ++r)
            for (std::size_t c = 0; c < scaled.cols(); ++c) scaled(r, c) *= eigenvalues[c];
        return scaled * eigenvectors.adjoint();
    }
};

inline constexpr double kHermitianTol = 1e-10;

// Eigendecomposition of a Hermitian matrix (Eigen's self-adjoint solver).
// Input must be Hermitian to within kHermitianTol, scaled by
// max(1, max|M_ij|); its Hermitian part is diagonalized.
inline EigDecomposition hermitian_eig(const ComplexMatrix& m) {
    if (!m.is_square()) throw ValidationError("hermitian_eig: matrix is not square");
    const std::size_t n = m.rows();
    const double scale = std::max(1.0, m.max_abs());
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = r; c < n; ++c)
            if (std::abs(m(r, c) - std::conj(m(c, r))) > kHermitianTol * scale)
                throw ValidationError("hermitian_eig: matrix is not Hermitian");

    const auto ni = static_cast<Eigen::Index>(n);
    Eigen::MatrixXcd a(ni, ni);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c)
            a(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = 0.5 * (m(r, c) + std::conj(m(c, r)));
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(a);
    if (solver.info() != Eigen::Success) throw NumericalError("hermitian_eig: eigensolver did not converge");

    EigDecomposition out{std::vector<double>(n), ComplexMatrix(n, n)};
    for (std::size_t k = 0; k < n; ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        out.eigenvalues[k] = solver.eigenvalues()(kk);
        for (std::size_t r = 0; r < n; ++r)
            out.eigenvectors(r, k) = solver.eigenvectors()(static_cast<Eigen::Index>(r), kk);
    }
    return out;
}

inline constexpr double kPsdClip = 1e-10;

// f(M) = U f(Lambda) U^dagger for a Hermitian M.
template <class Fn>
ComplexMatrix apply_spectral(const EigDecomposition& eig, Fn&& fn) {
    EigDecomposition mapped = eig;
    for (auto& l : mapped.eigenvalues) l = fn(l);
    return mapped.reconstruct();
}

// Square root of a positive-semidefinite matrix. Eigenvalues in
// [-clip, 0) are treated as 0; anything more negative is an error.
inline ComplexMatrix psd_sqrt(const ComplexMatrix& m, double clip = kPsdClip) {
    const auto eig = hermitian_eig(m);
    if (!eig.eigenvalues.empty() && eig.eigenvalues.front() < -clip) {
        throw ValidationError("psd_sqrt: matrix has eigenvalue " + std::to_string(eig.eigenvalues.front()) +
                              " below -" + std::to_string(clip));
    }
    return apply_spectral(eig, [](double l) { return std::sqrt(std::max(l, 0.0)); });
}

}  // namespace qfid
