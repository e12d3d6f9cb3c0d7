// ed_oracle.hpp — brute-force dense simulation of the full 2^N-dimensional ring
//
// Basis convention: computational state s = sum_j n_j 2^(N-j) with n_j = 1 for
// |up_j> (sigma^z = +1) and n_j = 0 for |down_j>. Site 1, the system spin, is
// the slowest-varying tensor factor. |down ... down> is s = 0.
//
// The Hamiltonian is real in this basis and is diagonalized block by block:
// blocks are the connected components of its nonzero pattern (parity sectors
// for gamma != 0, magnetization sectors for gamma = 0). Time evolution is pure
// spectral evolution; there is no time-stepping integrator.

#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "xychain/chain_model.hpp"
#include "xychain/error.hpp"
#include "xychain/exact_dynamics.hpp"
#include "xychain/trajectory.hpp"

namespace xychain::ed {

using cd = std::complex<double>;
using RealOperator = Eigen::MatrixXd;
using DenseOperator = Eigen::MatrixXcd;
using SparseOperator = Eigen::SparseMatrix<cd>;

inline constexpr int kDefaultCap = 12;
inline constexpr int kHardCap = 14;

inline void check_cap(const char* what, int N, int cap) {
    if (cap > kHardCap) throw CapExceeded(std::string(what) + " (requested cap above hard cap)", cap, kHardCap);
    if (N > cap) throw CapExceeded(what, N, cap);
}

inline Eigen::Index dimension(int N) { return Eigen::Index{1} << N; }

// Bit of site j (1-based) in the computational index.
inline std::uint64_t site_mask(int N, int site) { return std::uint64_t{1} << (N - site); }

// Pi = prod_j sigma^z_j evaluated on a basis state.
inline int parity_of(std::uint64_t s, int N) { return (N - std::popcount(s)) % 2 == 0 ? 1 : -1; }

enum class Pauli { X, Y, Z };

inline const char* to_string(Pauli p) {
    switch (p) {
        case Pauli::X: return "sx";
        case Pauli::Y: return "sy";
        case Pauli::Z: return "sz";
    }
    return "?";
}

struct BasisImage {
    std::uint64_t target;
    cd amplitude;
};

// sigma^alpha_site |s> = amplitude |target>.
inline BasisImage apply_pauli(int N, int site, Pauli p, std::uint64_t s) {
    const std::uint64_t m = site_mask(N, site);
    const bool up = (s & m) != 0;
    switch (p) {
        case Pauli::Z: return {s, up ? cd{1.0, 0.0} : cd{-1.0, 0.0}};
        case Pauli::X: return {s ^ m, cd{1.0, 0.0}};
        case Pauli::Y: return {s ^ m, up ? cd{0.0, 1.0} : cd{0.0, -1.0}};
    }
    return {s, cd{}};
}

inline Eigen::VectorXcd apply_pauli(int N, int site, Pauli p, const Eigen::VectorXcd& v) {
    Eigen::VectorXcd out = Eigen::VectorXcd::Zero(v.size());
    for (Eigen::Index s = 0; s < v.size(); ++s) {
        if (v[s] == cd{}) continue;
        const BasisImage img = apply_pauli(N, site, p, static_cast<std::uint64_t>(s));
        out[static_cast<Eigen::Index>(img.target)] += img.amplitude * v[s];
    }
    return out;
}

inline SparseOperator pauli_operator(int N, int site, Pauli p) {
    const Eigen::Index d = dimension(N);
    std::vector<Eigen::Triplet<cd>> trip;
    trip.reserve(static_cast<std::size_t>(d));
    for (Eigen::Index s = 0; s < d; ++s) {
        const BasisImage img = apply_pauli(N, site, p, static_cast<std::uint64_t>(s));
        trip.emplace_back(static_cast<Eigen::Index>(img.target), s, img.amplitude);
    }
    SparseOperator op(d, d);
    op.setFromTriplets(trip.begin(), trip.end());
    return op;
}

inline SparseOperator parity_operator(int N) {
    const Eigen::Index d = dimension(N);
    SparseOperator op(d, d);
    op.reserve(Eigen::VectorXi::Constant(d, 1));
    for (Eigen::Index s = 0; s < d; ++s) op.insert(s, s) = cd(parity_of(static_cast<std::uint64_t>(s), N), 0.0);
    op.makeCompressed();
    return op;
}

// H = kappa/4 sum_j ((1+gamma) sx_j sx_{j+1} + (1-gamma) sy_j sy_{j+1}) + h/2 sum_j sz_j,
// site N+1 identified with site 1 (for N = 2 the single bond is counted twice).
inline RealOperator build_hamiltonian(const ChainParams& params, int cap = kDefaultCap) {
    const int N = params.N();
    check_cap("build_hamiltonian", N, cap);
    const Eigen::Index d = dimension(N);
    const double hop = params.kappa() / 2.0;                     // spins opposite
    const double pair = params.kappa() * params.gamma() / 2.0;   // spins aligned
    RealOperator H = RealOperator::Zero(d, d);
    for (Eigen::Index si = 0; si < d; ++si) {
        const auto s = static_cast<std::uint64_t>(si);
        H(si, si) = params.h() / 2.0 * (2.0 * std::popcount(s) - N);
        for (int j = 1; j <= N; ++j) {
            const int jn = j % N + 1;
            const std::uint64_t mj = site_mask(N, j);
            const std::uint64_t mn = site_mask(N, jn);
            const bool aligned = ((s & mj) != 0) == ((s & mn) != 0);
            const double amp = aligned ? pair : hop;
            if (amp != 0.0) H(static_cast<Eigen::Index>(s ^ mj ^ mn), si) += amp;
        }
    }
    return H;
}

inline double hermiticity_defect(const RealOperator& H) { return (H - H.transpose()).cwiseAbs().maxCoeff(); }

// ---------------------------------------------------------------------------
// Spectral decomposition

struct SpectralBlock {
    std::vector<Eigen::Index> basis;  // computational states, ascending
    Eigen::VectorXd energies;         // ascending
    Eigen::MatrixXd vectors;          // columns are eigenvectors in the block basis
    Eigen::MatrixXd hamiltonian;      // H restricted to the block
    int parity{1};
};

class EigenDecomposition {
public:
    EigenDecomposition(const RealOperator& H, int N) : N_(N), dim_(H.rows()) {
        if (H.rows() != H.cols()) throw ConfigError("EigenDecomposition: Hamiltonian must be square");
        if (H.rows() != dimension(N)) throw ConfigError("EigenDecomposition: dimension is not 2^N");
        if (hermiticity_defect(H) > 1e-12) throw NumericalError("EigenDecomposition: Hamiltonian is not symmetric");

        // Connected components of the nonzero pattern.
        std::vector<Eigen::Index> root(static_cast<std::size_t>(dim_));
        std::iota(root.begin(), root.end(), Eigen::Index{0});
        auto find = [&](Eigen::Index x) {
            while (root[static_cast<std::size_t>(x)] != x) {
                root[static_cast<std::size_t>(x)] = root[static_cast<std::size_t>(root[static_cast<std::size_t>(x)])];
                x = root[static_cast<std::size_t>(x)];
            }
            return x;
        };
        for (Eigen::Index c = 0; c < dim_; ++c) {
            for (Eigen::Index r = c + 1; r < dim_; ++r) {
                if (H(r, c) != 0.0) {
                    const Eigen::Index a = find(r);
                    const Eigen::Index b = find(c);
                    if (a != b) root[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
                }
            }
        }
        block_of_.assign(static_cast<std::size_t>(dim_), -1);
        position_.assign(static_cast<std::size_t>(dim_), -1);
        std::vector<Eigen::Index> root_to_block(static_cast<std::size_t>(dim_), -1);
        for (Eigen::Index s = 0; s < dim_; ++s) {
            const Eigen::Index r = find(s);
            auto& b = root_to_block[static_cast<std::size_t>(r)];
            if (b < 0) {
                b = static_cast<Eigen::Index>(blocks_.size());
                blocks_.emplace_back();
                blocks_.back().parity = parity_of(static_cast<std::uint64_t>(s), N);
            }
            auto& blk = blocks_[static_cast<std::size_t>(b)];
            block_of_[static_cast<std::size_t>(s)] = b;
            position_[static_cast<std::size_t>(s)] = static_cast<Eigen::Index>(blk.basis.size());
            blk.basis.push_back(s);
        }

        for (auto& blk : blocks_) {
            const auto n = static_cast<Eigen::Index>(blk.basis.size());
            blk.hamiltonian.resize(n, n);
            for (Eigen::Index i = 0; i < n; ++i) {
                for (Eigen::Index j = 0; j < n; ++j) {
                    blk.hamiltonian(i, j) = H(blk.basis[static_cast<std::size_t>(i)], blk.basis[static_cast<std::size_t>(j)]);
                }
            }
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(blk.hamiltonian);
            if (solver.info() != Eigen::Success) throw NumericalError("EigenDecomposition: eigensolver failed");
            blk.energies = solver.eigenvalues();
            blk.vectors = solver.eigenvectors();
        }
    }

    int num_sites() const noexcept { return N_; }
    Eigen::Index dim() const noexcept { return dim_; }
    const std::vector<SpectralBlock>& blocks() const noexcept { return blocks_; }
    Eigen::Index block_of(Eigen::Index s) const { return block_of_[static_cast<std::size_t>(s)]; }
    Eigen::Index position_in_block(Eigen::Index s) const { return position_[static_cast<std::size_t>(s)]; }

    // All eigenvalues, ascending.
    Eigen::VectorXd energies() const {
        std::vector<double> all;
        all.reserve(static_cast<std::size_t>(dim_));
        for (const auto& b : blocks_) all.insert(all.end(), b.energies.data(), b.energies.data() + b.energies.size());
        std::sort(all.begin(), all.end());
        return Eigen::Map<Eigen::VectorXd>(all.data(), static_cast<Eigen::Index>(all.size()));
    }

    // Full orthogonal eigenvector matrix, columns ordered like energies().
    Eigen::MatrixXd vectors() const {
        std::vector<std::pair<double, std::pair<std::size_t, Eigen::Index>>> order;
        for (std::size_t b = 0; b < blocks_.size(); ++b) {
            for (Eigen::Index k = 0; k < blocks_[b].energies.size(); ++k) order.push_back({blocks_[b].energies[k], {b, k}});
        }
        std::stable_sort(order.begin(), order.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
        Eigen::MatrixXd V = Eigen::MatrixXd::Zero(dim_, dim_);
        for (std::size_t col = 0; col < order.size(); ++col) {
            const auto [b, k] = order[col].second;
            const auto& blk = blocks_[b];
            for (std::size_t i = 0; i < blk.basis.size(); ++i) {
                V(blk.basis[i], static_cast<Eigen::Index>(col)) = blk.vectors(static_cast<Eigen::Index>(i), k);
            }
        }
        return V;
    }

    // max_n |H v_n - E_n v_n|
    double residual() const {
        double worst = 0.0;
        for (const auto& b : blocks_) {
            const Eigen::MatrixXd r = b.hamiltonian * b.vectors - b.vectors * b.energies.asDiagonal();
            if (r.size() > 0) worst = std::max(worst, r.colwise().norm().maxCoeff());
        }
        return worst;
    }

private:
    int N_;
    Eigen::Index dim_;
    std::vector<SpectralBlock> blocks_;
    std::vector<Eigen::Index> block_of_;
    std::vector<Eigen::Index> position_;
};

inline EigenDecomposition diagonalize(const ChainParams& params, int cap = kDefaultCap) {
    return EigenDecomposition(build_hamiltonian(params, cap), params.N());
}

// ---------------------------------------------------------------------------
// States

class DenseState {
public:
    static DenseState pure(Eigen::VectorXcd psi) { return DenseState(std::move(psi)); }
    static DenseState mixed(Eigen::MatrixXcd rho) {
        if (rho.rows() != rho.cols()) throw ConfigError("DenseState: density matrix must be square");
        return DenseState(std::move(rho));
    }

    bool is_pure() const noexcept { return std::holds_alternative<Eigen::VectorXcd>(data_); }

    Eigen::Index dim() const noexcept {
        return is_pure() ? std::get<Eigen::VectorXcd>(data_).size() : std::get<Eigen::MatrixXcd>(data_).rows();
    }

    int num_sites() const {
        const Eigen::Index d = dim();
        if (d < 2 || (d & (d - 1)) != 0) throw ConfigError("DenseState: dimension is not a power of two");
        return std::countr_zero(static_cast<std::uint64_t>(d));
    }

    const Eigen::VectorXcd& vector() const {
        if (!is_pure()) throw ConfigError("DenseState: state is stored as a density matrix");
        return std::get<Eigen::VectorXcd>(data_);
    }
    const Eigen::MatrixXcd& matrix() const {
        if (is_pure()) throw ConfigError("DenseState: state is stored as a vector");
        return std::get<Eigen::MatrixXcd>(data_);
    }

    Eigen::MatrixXcd density() const {
        if (is_pure()) {
            const auto& v = vector();
            return v * v.adjoint();
        }
        return matrix();
    }

    cd trace() const { return is_pure() ? cd(vector().squaredNorm(), 0.0) : matrix().trace(); }

    double purity() const {
        if (is_pure()) {
            const double n2 = vector().squaredNorm();
            return n2 * n2;
        }
        return matrix().cwiseAbs2().sum();
    }

    // tr(rho A)
    template <class Op>
    cd expectation(const Op& A) const {
        if (is_pure()) {
            const Eigen::VectorXcd Av = A * vector();
            return vector().dot(Av);
        }
        const Eigen::MatrixXcd Arho = A * matrix();
        return Arho.trace();
    }

private:
    explicit DenseState(Eigen::VectorXcd v) : data_(std::move(v)) {}
    explicit DenseState(Eigen::MatrixXcd m) : data_(std::move(m)) {}

    std::variant<Eigen::VectorXcd, Eigen::MatrixXcd> data_;
};

// Infinite-T: rho = 2^{-N} (1 + p0.sigma_1).  Zero-T: (1 + p0.sigma_1)/2 x |down...down><down...down|,
// stored as a vector when |p0| = 1.
inline DenseState initial_state(Bath kind, const Polarization3& p0, int N) {
    check_polarization(p0, "initial_state");
    if (N < 2) throw ConfigError("initial_state: N must be >= 2");
    check_cap("initial_state", N, kHardCap);
    const Eigen::Index d = dimension(N);
    const auto up1 = static_cast<Eigen::Index>(site_mask(N, 1));

    if (kind == Bath::ZeroT) {
        if (std::abs(p0.norm() - 1.0) <= 1e-12) {
            const double theta = std::acos(std::clamp(p0.pz / p0.norm(), -1.0, 1.0));
            const double phi = std::atan2(p0.py, p0.px);
            Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(d);
            psi[up1] = std::cos(theta / 2.0);
            psi[0] = std::polar(std::sin(theta / 2.0), phi);
            return DenseState::pure(std::move(psi));
        }
        Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(d, d);
        rho(up1, up1) = (1.0 + p0.pz) / 2.0;
        rho(0, 0) = (1.0 - p0.pz) / 2.0;
        rho(up1, 0) = cd(p0.px, -p0.py) / 2.0;
        rho(0, up1) = cd(p0.px, p0.py) / 2.0;
        return DenseState::mixed(std::move(rho));
    }

    const double w = std::ldexp(1.0, -N);
    Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(d, d);
    for (Eigen::Index si = 0; si < d; ++si) {
        const auto s = static_cast<std::uint64_t>(si);
        rho(si, si) += w * (1.0 + p0.pz * apply_pauli(N, 1, Pauli::Z, s).amplitude.real());
        const BasisImage ix = apply_pauli(N, 1, Pauli::X, s);
        const BasisImage iy = apply_pauli(N, 1, Pauli::Y, s);
        rho(static_cast<Eigen::Index>(ix.target), si) += w * (p0.px * ix.amplitude + p0.py * iy.amplitude);
    }
    return DenseState::mixed(std::move(rho));
}

namespace detail {

inline Eigen::VectorXcd gather(const Eigen::VectorXcd& v, const std::vector<Eigen::Index>& idx) {
    Eigen::VectorXcd out(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[idx[i]];
    return out;
}

inline Eigen::MatrixXcd gather(const Eigen::MatrixXcd& m, const std::vector<Eigen::Index>& rows,
                               const std::vector<Eigen::Index>& cols) {
    Eigen::MatrixXcd out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) {
        for (std::size_t i = 0; i < rows.size(); ++i) {
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = m(rows[i], cols[j]);
        }
    }
    return out;
}

inline Eigen::VectorXcd phases(const Eigen::VectorXd& energies, double t) {
    Eigen::VectorXcd p(energies.size());
    for (Eigen::Index i = 0; i < energies.size(); ++i) p[i] = std::polar(1.0, -energies[i] * t);
    return p;
}

}  // namespace detail

// rho(t) = exp(-iHt) rho(0) exp(iHt), evaluated in the eigenbasis.
inline DenseState evolve(const DenseState& rho0, const EigenDecomposition& eig, double t) {
    if (rho0.dim() != eig.dim()) throw ConfigError("evolve: state and Hamiltonian dimensions differ");
    const auto& blocks = eig.blocks();
    if (rho0.is_pure()) {
        const Eigen::VectorXcd& psi = rho0.vector();
        Eigen::VectorXcd out = Eigen::VectorXcd::Zero(psi.size());
        for (const auto& b : blocks) {
            const Eigen::VectorXcd sub = detail::gather(psi, b.basis);
            if (sub.isZero(0.0)) continue;
            const Eigen::VectorXcd coeff = b.vectors.transpose().cast<cd>() * sub;
            const Eigen::VectorXcd moved = b.vectors.cast<cd>() * detail::phases(b.energies, t).cwiseProduct(coeff);
            for (std::size_t i = 0; i < b.basis.size(); ++i) out[b.basis[i]] = moved[static_cast<Eigen::Index>(i)];
        }
        return DenseState::pure(std::move(out));
    }
    const Eigen::MatrixXcd& rho = rho0.matrix();
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(rho.rows(), rho.cols());
    for (const auto& br : blocks) {
        const Eigen::VectorXcd ur = detail::phases(br.energies, t);
        for (const auto& bc : blocks) {
            const Eigen::MatrixXcd sub = detail::gather(rho, br.basis, bc.basis);
            if (sub.isZero(0.0)) continue;
            Eigen::MatrixXcd tilde = br.vectors.transpose().cast<cd>() * sub * bc.vectors.cast<cd>();
            const Eigen::VectorXcd uc = detail::phases(bc.energies, t).conjugate();
            tilde = ur.asDiagonal() * tilde * uc.asDiagonal();
            const Eigen::MatrixXcd back = br.vectors.cast<cd>() * tilde * bc.vectors.transpose().cast<cd>();
            for (std::size_t j = 0; j < bc.basis.size(); ++j) {
                for (std::size_t i = 0; i < br.basis.size(); ++i) {
                    out(br.basis[i], bc.basis[j]) = back(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
                }
            }
        }
    }
    return DenseState::mixed(std::move(out));
}

// Partial trace over sites 2..N; 2x2 result in the (|up>, |down>) ordering.
inline Eigen::Matrix2cd reduce_to_system(const DenseState& state) {
    const int N = state.num_sites();
    const Eigen::Index half = dimension(N) / 2;
    Eigen::Matrix2cd r = Eigen::Matrix2cd::Zero();
    if (state.is_pure()) {
        const auto& v = state.vector();
        const auto up = v.segment(half, half);
        const auto dn = v.segment(0, half);
        r(0, 0) = up.squaredNorm();
        r(1, 1) = dn.squaredNorm();
        r(0, 1) = dn.dot(up);  // sum up_r conj(dn_r)
        r(1, 0) = std::conj(r(0, 1));
        return r;
    }
    const auto& m = state.matrix();
    for (Eigen::Index k = 0; k < half; ++k) {
        r(0, 0) += m(half + k, half + k);
        r(1, 1) += m(k, k);
        r(0, 1) += m(half + k, k);
        r(1, 0) += m(k, half + k);
    }
    return r;
}

// p^alpha = tr(sigma^alpha rho_S).
inline Polarization3 polarization(const Eigen::Matrix2cd& rho_s) {
    return {2.0 * rho_s(0, 1).real(), -2.0 * rho_s(0, 1).imag(), (rho_s(0, 0) - rho_s(1, 1)).real()};
}

// ---------------------------------------------------------------------------
// Polarization trajectories of the first spin

struct PolarizationSeries {
    std::vector<double> px, py, pz;
    OracleAudit audit;
};

namespace detail {

// S^alpha restricted to rows of block `to` and columns of block `from`, in the eigenbases.
inline Eigen::MatrixXcd site1_in_eigenbasis(const EigenDecomposition& eig, std::size_t to, std::size_t from, Pauli p) {
    const int N = eig.num_sites();
    const auto& bt = eig.blocks()[to];
    const auto& bf = eig.blocks()[from];
    Eigen::MatrixXcd mapped = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(bt.basis.size()), bf.vectors.cols());
    bool any = false;
    for (std::size_t i = 0; i < bf.basis.size(); ++i) {
        const BasisImage img = apply_pauli(N, 1, p, static_cast<std::uint64_t>(bf.basis[i]));
        const auto target = static_cast<Eigen::Index>(img.target);
        if (static_cast<std::size_t>(eig.block_of(target)) != to) continue;
        mapped.row(eig.position_in_block(target)) += img.amplitude * bf.vectors.row(static_cast<Eigen::Index>(i)).cast<cd>();
        any = true;
    }
    if (!any) return Eigen::MatrixXcd();
    return bt.vectors.transpose().cast<cd>() * mapped;
}

inline PolarizationSeries pure_series(const EigenDecomposition& eig, const Eigen::VectorXcd& psi,
                                      const std::vector<double>& grid) {
    const int N = eig.num_sites();
    const Eigen::Index half = dimension(N) / 2;
    struct Active {
        const SpectralBlock* block;
        Eigen::VectorXcd coeff;
        Eigen::MatrixXcd vectors;
    };
    std::vector<Active> active;
    for (const auto& b : eig.blocks()) {
        const Eigen::VectorXcd sub = gather(psi, b.basis);
        if (sub.isZero(0.0)) continue;
        active.push_back({&b, b.vectors.transpose().cast<cd>() * sub, b.vectors.cast<cd>()});
    }
    PolarizationSeries out;
    Eigen::VectorXcd state(psi.size());
    for (double t : grid) {
        state.setZero();
        double energy = 0.0;
        double par = 0.0;
        for (const auto& a : active) {
            const Eigen::VectorXcd v = a.vectors * phases(a.block->energies, t).cwiseProduct(a.coeff);
            energy += v.dot(a.block->hamiltonian.cast<cd>() * v).real();
            par += a.block->parity * v.squaredNorm();
            for (std::size_t i = 0; i < a.block->basis.size(); ++i) state[a.block->basis[i]] = v[static_cast<Eigen::Index>(i)];
        }
        const auto up = state.segment(half, half);
        const auto dn = state.segment(0, half);
        const cd r01 = dn.dot(up);
        out.px.push_back(2.0 * r01.real());
        out.py.push_back(-2.0 * r01.imag());
        out.pz.push_back(up.squaredNorm() - dn.squaredNorm());
        const double n2 = state.squaredNorm();
        out.audit.energy.push_back(energy);
        out.audit.purity.push_back(n2 * n2);
        out.audit.parity.push_back(par);
    }
    return out;
}

inline PolarizationSeries mixed_series(const EigenDecomposition& eig, const Eigen::MatrixXcd& rho,
                                       const std::vector<double>& grid) {
    const auto& blocks = eig.blocks();
    struct Weighted {
        std::size_t row, col;
        Eigen::MatrixXcd w[3];  // x, y, z
    };
    std::vector<Weighted> terms;
    double energy = 0.0, purity = 0.0, par = 0.0;
    for (std::size_t r = 0; r < blocks.size(); ++r) {
        for (std::size_t c = 0; c < blocks.size(); ++c) {
            const Eigen::MatrixXcd sub = gather(rho, blocks[r].basis, blocks[c].basis);
            if (sub.isZero(0.0)) continue;
            const Eigen::MatrixXcd tilde = blocks[r].vectors.transpose().cast<cd>() * sub * blocks[c].vectors.cast<cd>();
            purity += tilde.cwiseAbs2().sum();
            if (r == c) {
                energy += (tilde.diagonal().real().array() * blocks[r].energies.array()).sum();
                par += blocks[r].parity * tilde.trace().real();
            }
            // p^alpha(t) = sum_nm rho~_nm e^{-i(E_n-E_m)t} S~_mn, S~ taken from block c to block r.
            Weighted wt{r, c, {}};
            bool any = false;
            const Pauli ops[3] = {Pauli::X, Pauli::Y, Pauli::Z};
            for (int a = 0; a < 3; ++a) {
                const Eigen::MatrixXcd S = site1_in_eigenbasis(eig, c, r, ops[a]);
                if (S.size() == 0) continue;
                wt.w[a] = tilde.cwiseProduct(S.transpose());
                any = true;
            }
            if (any) terms.push_back(std::move(wt));
        }
    }
    PolarizationSeries out;
    for (double t : grid) {
        double p[3] = {0.0, 0.0, 0.0};
        for (const auto& term : terms) {
            const Eigen::VectorXcd ur = phases(blocks[term.row].energies, t);
            const Eigen::VectorXcd uc = phases(blocks[term.col].energies, t).conjugate();
            for (int a = 0; a < 3; ++a) {
                if (term.w[a].size() == 0) continue;
                p[a] += (ur.transpose() * term.w[a] * uc).value().real();
            }
        }
        out.px.push_back(p[0]);
        out.py.push_back(p[1]);
        out.pz.push_back(p[2]);
        out.audit.energy.push_back(energy);
        out.audit.purity.push_back(purity);
        out.audit.parity.push_back(par);
    }
    return out;
}

}  // namespace detail

inline PolarizationSeries polarization_series(const EigenDecomposition& eig, const DenseState& rho0,
                                              const std::vector<double>& grid) {
    if (rho0.dim() != eig.dim()) throw ConfigError("polarization_series: state and Hamiltonian dimensions differ");
    return rho0.is_pure() ? detail::pure_series(eig, rho0.vector(), grid) : detail::mixed_series(eig, rho0.matrix(), grid);
}

// Full dense-oracle run: Hamiltonian, diagonalization, initial state, reduced polarization.
inline Trajectory oracle_trajectory(const ChainParams& params, Bath bath, const Polarization3& p0,
                                    const std::vector<double>& grid, int cap = kDefaultCap) {
    check_cap("oracle_trajectory", params.N(), cap);
    check_polarization(p0, "oracle_trajectory");
    check_time_grid(grid);
    const EigenDecomposition eig = diagonalize(params, cap);
    const DenseState rho0 = initial_state(bath, p0, params.N());
    PolarizationSeries s = polarization_series(eig, rho0, grid);
    Trajectory traj{.grid = grid,
                    .px = std::move(s.px),
                    .py = std::move(s.py),
                    .pz = std::move(s.pz),
                    .meta = TrajectoryMeta{.params = params, .method = Method::EdOracle, .bath = bath, .p0 = p0,
                                           .valid_regime = true},
                    .audit = std::move(s.audit)};
    return traj;
}

// ---------------------------------------------------------------------------
// Jordan-Wigner / Fourier / Bogolyubov operators and free-fermion eigenstates

inline Parity sector_of(Momentum q) { return q.twice % 2 == 0 ? Parity::Odd : Parity::Even; }

class FermionOperators {
public:
    explicit FermionOperators(const ChainParams& params, int cap = kDefaultCap)
        : params_(params),
          odd_(params, make_sector(params.N(), Parity::Odd)),
          even_(params, make_sector(params.N(), Parity::Even)) {
        check_cap("FermionOperators", params.N(), cap);
        const int N = params.N();
        const Eigen::Index d = dimension(N);
        a_minus_.reserve(static_cast<std::size_t>(N));
        for (int j = 1; j <= N; ++j) {
            std::vector<Eigen::Triplet<cd>> trip;
            const std::uint64_t mj = site_mask(N, j);
            for (Eigen::Index si = 0; si < d; ++si) {
                const auto s = static_cast<std::uint64_t>(si);
                if ((s & mj) == 0) continue;
                // Pi_{j-1} = prod_{i<j} sigma^z_i on the unchanged sites 1..j-1.
                const std::uint64_t left = s >> (N - j + 1);
                const int downs = (j - 1) - std::popcount(left);
                trip.emplace_back(static_cast<Eigen::Index>(s ^ mj), si, cd(downs % 2 == 0 ? 1.0 : -1.0, 0.0));
            }
            SparseOperator a(d, d);
            a.setFromTriplets(trip.begin(), trip.end());
            a_minus_.push_back(std::move(a));
        }
    }

    int N() const noexcept { return params_.N(); }
    const ChainParams& params() const noexcept { return params_; }
    const SpectralTable& table(Parity p) const noexcept { return p == Parity::Odd ? odd_ : even_; }

    // a_j^- = sigma_j^- Pi_{j-1}, j = 1..N
    const SparseOperator& a_minus(int site) const { return a_minus_.at(static_cast<std::size_t>(site - 1)); }
    SparseOperator a_plus(int site) const { return SparseOperator(a_minus(site).adjoint()); }

    // b_q^- = e^{i pi/4} N^{-1/2} sum_n e^{-2 pi i q (n-1)/N} a_n^-, any real q on the half-integer lattice.
    SparseOperator b_minus(Momentum q) const {
        const int N = params_.N();
        SparseOperator b(dimension(N), dimension(N));
        const cd pre = std::polar(1.0 / std::sqrt(static_cast<double>(N)), std::numbers::pi / 4.0);
        for (int n = 1; n <= N; ++n) {
            const auto [c, s] = unit_circle(-static_cast<long long>(q.twice) * (n - 1), N);
            b += (pre * cd(c, s)) * a_minus(n);
        }
        return b;
    }
    SparseOperator b_plus(Momentum q) const { return SparseOperator(b_minus(q).adjoint()); }

    // c_q^- = cos(theta_q/2) b_q^- - sin(theta_q/2) b_{-q}^+
    SparseOperator c_minus(Momentum q) const {
        const double theta = table(sector_of(q)).mode(q).theta;
        return SparseOperator(std::cos(theta / 2.0) * b_minus(q) - std::sin(theta / 2.0) * b_plus(-q));
    }
    SparseOperator c_plus(Momentum q) const { return SparseOperator(c_minus(q).adjoint()); }

    SparseOperator parity() const { return parity_operator(params_.N()); }

    // P^ev = (1 + Pi)/2, P^odd = (1 - Pi)/2
    SparseOperator parity_projector(Parity p) const {
        const int N = params_.N();
        const Eigen::Index d = dimension(N);
        SparseOperator op(d, d);
        op.reserve(Eigen::VectorXi::Constant(d, 1));
        const int want = p == Parity::Even ? 1 : -1;
        for (Eigen::Index s = 0; s < d; ++s) {
            if (parity_of(static_cast<std::uint64_t>(s), N) == want) op.insert(s, s) = cd(1.0, 0.0);
        }
        op.makeCompressed();
        return op;
    }

    // P^odd sum_{q odd} E_q (c+c - 1/2) + P^ev sum_{q ev} E_q (c+c - 1/2)
    SparseOperator free_fermion_hamiltonian() const {
        const Eigen::Index d = dimension(params_.N());
        SparseOperator id(d, d);
        id.setIdentity();
        SparseOperator total(d, d);
        for (Parity p : {Parity::Odd, Parity::Even}) {
            SparseOperator sector_h(d, d);
            for (const auto& m : table(p).modes()) {
                const SparseOperator cm = c_minus(m.q);
                const SparseOperator n = SparseOperator(cm.adjoint()) * cm;
                sector_h += m.E * (n - 0.5 * id);
            }
            total += parity_projector(p) * sector_h;
        }
        return total;
    }

    // c-vacuum of a sector: all sector c^- applied to |up ... up>, normalized.
    Eigen::VectorXcd vacuum(Parity p) const {
        const Eigen::Index d = dimension(params_.N());
        Eigen::VectorXcd v = Eigen::VectorXcd::Zero(d);
        v[d - 1] = 1.0;
        const auto& momenta = table(p).sector().momenta;
        for (auto it = momenta.rbegin(); it != momenta.rend(); ++it) v = c_minus(*it) * v;
        const double nrm = v.norm();
        if (nrm < 1e-8) {
            throw NumericalError(std::string("vacuum normalization failed in the ") + to_string(p) + " sector");
        }
        return v / nrm;
    }

    // |Q> = c+_{q1} ... c+_{qM} |vac>, q1 < ... < qM.
    Eigen::VectorXcd eigenstate(const FermionConfig& config) const {
        if (config.sector().N != params_.N()) throw ConfigError("eigenstate: configuration built for a different N");
        Eigen::VectorXcd v = vacuum(config.parity());
        const auto occ = config.occupied();
        for (auto it = occ.rbegin(); it != occ.rend(); ++it) v = c_plus(*it) * v;
        return v / v.norm();
    }

    // sum_{q in Q} E_q - 1/2 sum_{q in sector} E_q
    double eigen_energy(const FermionConfig& config) const {
        const auto& tab = table(config.parity());
        double e = -0.5 * tab.energy_sum();
        for (std::size_t i = 0; i < tab.size(); ++i) {
            if (config.occupies(i)) e += tab[i].E;
        }
        return e;
    }

private:
    ChainParams params_;
    SpectralTable odd_;
    SpectralTable even_;
    std::vector<SparseOperator> a_minus_;
};

inline Eigen::VectorXcd construct_eigenstate(const FermionConfig& config, const ChainParams& params,
                                             int cap = kDefaultCap) {
    return FermionOperators(params, cap).eigenstate(config);
}

// <bra| sigma_1^alpha |ket> between free-fermion eigenstates.
inline cd eigen_matrix_element(const FermionOperators& ops, const FermionConfig& bra, const FermionConfig& ket,
                               Pauli observable) {
    const Eigen::VectorXcd b = ops.eigenstate(bra);
    const Eigen::VectorXcd k = ops.eigenstate(ket);
    return b.dot(apply_pauli(ops.N(), 1, observable, k));
}

// ---------------------------------------------------------------------------
// Spectrum equivalence

struct SpectrumReport {
    std::size_t levels{0};
    double max_mismatch{0.0};
    std::optional<FermionConfig> worst;  // configuration at the largest mismatch
    double worst_dense{0.0};
    double worst_free{0.0};
};

class SpectrumMismatch : public NumericalError {
public:
    explicit SpectrumMismatch(SpectrumReport report)
        : NumericalError("spectrum mismatch " + std::to_string(report.max_mismatch) + " at configuration " +
                         (report.worst ? report.worst->to_string() : std::string("?"))),
          report_(std::move(report)) {}
    const SpectrumReport& report() const noexcept { return report_; }

private:
    SpectrumReport report_;
};

inline constexpr double kSpectrumTolerance = 1e-8;

// Levels sum_{q in Q} E_q - 1/2 sum E_q over parity-admissible Q, paired in sorted order
// against the dense eigenvalues.
inline SpectrumReport spectrum_equivalence(const ChainParams& params, int cap = kDefaultCap) {
    const int N = params.N();
    check_cap("spectrum_equivalence", N, cap);
    const Eigen::VectorXd dense = diagonalize(params, cap).energies();

    struct Level {
        double energy;
        Parity parity;
        std::uint64_t mask;
    };
    std::vector<Level> free;
    free.reserve(static_cast<std::size_t>(dimension(N)));
    for (Parity p : {Parity::Odd, Parity::Even}) {
        const SpectralTable tab(params, make_sector(N, p));
        const double offset = -0.5 * tab.energy_sum();
        for (std::uint64_t m = 0; m < (std::uint64_t{1} << N); ++m) {
            if ((std::popcount(m) % 2 == 1) != (p == Parity::Odd)) continue;
            double e = offset;
            for (int i = 0; i < N; ++i) {
                if ((m >> i) & 1u) e += tab[static_cast<std::size_t>(i)].E;
            }
            free.push_back({e, p, m});
        }
    }
    std::stable_sort(free.begin(), free.end(), [](const Level& a, const Level& b) { return a.energy < b.energy; });

    SpectrumReport rep;
    rep.levels = free.size();
    std::size_t worst = 0;
    for (std::size_t i = 0; i < free.size(); ++i) {
        const double diff = std::abs(free[i].energy - dense[static_cast<Eigen::Index>(i)]);
        if (i == 0 || diff > rep.max_mismatch) {
            rep.max_mismatch = diff;
            worst = i;
        }
    }
    rep.worst = FermionConfig(make_sector(N, free[worst].parity), free[worst].mask);
    rep.worst_dense = dense[static_cast<Eigen::Index>(worst)];
    rep.worst_free = free[worst].energy;
    if (rep.max_mismatch > kSpectrumTolerance) throw SpectrumMismatch(rep);
    return rep;
}

}  // namespace xychain::ed
