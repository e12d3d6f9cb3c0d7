// test_ed_oracle.cpp — dense Hamiltonian, time evolution and free-fermion operators
#include <catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "xychain/ed_oracle.hpp"
#include "xychain/exact_dynamics.hpp"

using namespace xychain;
using Catch::Matchers::WithinAbs;
using cd = std::complex<double>;

namespace {

// Single-site matrices in the (down, up) ordering used by the bit convention bit=1 -> up.
Eigen::Matrix2cd pauli(char which) {
    Eigen::Matrix2cd m = Eigen::Matrix2cd::Zero();
    switch (which) {
        case 'x': m << 0, 1, 1, 0; break;
        case 'y': m << 0, cd(0, 1), cd(0, -1), 0; break;
        case 'z': m << -1, 0, 0, 1; break;
        default: m.setIdentity();
    }
    return m;
}

Eigen::MatrixXcd kron(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
    Eigen::MatrixXcd out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

// sigma^which on `site` (1-based, site 1 leftmost factor)
Eigen::MatrixXcd site_op(int N, int site, char which) {
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Identity(1, 1);
    for (int j = 1; j <= N; ++j) out = kron(out, j == site ? pauli(which) : pauli('1'));
    return out;
}

Eigen::MatrixXcd kron_hamiltonian(const ChainParams& p) {
    const int N = p.N();
    const Eigen::Index d = Eigen::Index{1} << N;
    Eigen::MatrixXcd H = Eigen::MatrixXcd::Zero(d, d);
    for (int j = 1; j <= N; ++j) {
        const int k = j % N + 1;
        H += p.kappa() / 4.0 * ((1 + p.gamma()) * site_op(N, j, 'x') * site_op(N, k, 'x') +
                                (1 - p.gamma()) * site_op(N, j, 'y') * site_op(N, k, 'y'));
        H += p.h() / 2.0 * site_op(N, j, 'z');
    }
    return H;
}

Eigen::MatrixXcd dense(const ed::SparseOperator& s) { return Eigen::MatrixXcd(s); }

Eigen::MatrixXcd random_density(int N, std::mt19937_64& rng, bool pure) {
    const Eigen::Index d = Eigen::Index{1} << N;
    std::normal_distribution<double> g;
    Eigen::MatrixXcd A(d, pure ? 1 : d);
    for (Eigen::Index i = 0; i < A.rows(); ++i)
        for (Eigen::Index j = 0; j < A.cols(); ++j) A(i, j) = cd(g(rng), g(rng));
    Eigen::MatrixXcd rho = A * A.adjoint();
    return rho / rho.trace().real();
}

}  // namespace

TEST_CASE("Hamiltonian equals a Kronecker-product construction", "[ed_oracle]") {
    for (int N : {2, 4, 6}) {
        for (double gamma : {0.0, 0.4, 1.0}) {
            const ChainParams p(N, 1.3, gamma, 2.5);
            const Eigen::MatrixXd H = ed::build_hamiltonian(p);
            const Eigen::MatrixXcd K = kron_hamiltonian(p);
            CHECK((H.cast<cd>() - K).cwiseAbs().maxCoeff() < 1e-14);
            CHECK(ed::hermiticity_defect(H) == 0.0);
        }
    }
}

TEST_CASE("N=2 zero-field spectrum", "[ed_oracle]") {
    const ChainParams p(2, 1.0, 0.0, 0.0, Regime::Permissive);
    const Eigen::VectorXd e = ed::diagonalize(p).energies();
    REQUIRE(e.size() == 4);
    CHECK_THAT(e[0], WithinAbs(-1.0, 1e-14));
    CHECK_THAT(e[1], WithinAbs(0.0, 1e-14));
    CHECK_THAT(e[2], WithinAbs(0.0, 1e-14));
    CHECK_THAT(e[3], WithinAbs(1.0, 1e-14));
}

TEST_CASE("block diagonalization matches a full eigensolver", "[ed_oracle]") {
    const ChainParams p(8, 1.0, 0.5, 2.0);
    const Eigen::MatrixXd H = ed::build_hamiltonian(p);
    const ed::EigenDecomposition eig(H, 8);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> full(H);
    CHECK((eig.energies() - full.eigenvalues()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(eig.residual() < 1e-12);
    const Eigen::MatrixXd V = eig.vectors();
    CHECK((V.transpose() * V - Eigen::MatrixXd::Identity(256, 256)).cwiseAbs().maxCoeff() < 1e-12);
    // every block has a definite parity
    for (const auto& b : eig.blocks())
        for (auto s : b.basis) CHECK(ed::parity_of(static_cast<std::uint64_t>(s), 8) == b.parity);
}

TEST_CASE("spectrum equals the free-fermion levels", "[ed_oracle]") {
    for (int N : {2, 4, 6, 8}) {
        for (double gamma : {0.0, 0.5, 1.0}) {
            const ed::SpectrumReport r = ed::spectrum_equivalence(ChainParams(N, 1.0, gamma, 2.0));
            CHECK(r.levels == (std::size_t{1} << N));
            CHECK(r.max_mismatch < 1e-10);
        }
    }
}

TEST_CASE("initial states", "[ed_oracle]") {
    const Polarization3 p0{0.3, -0.2, 0.5};
    for (Bath b : {Bath::InfiniteT, Bath::ZeroT}) {
        const ed::DenseState rho = ed::initial_state(b, p0, 4);
        CHECK_THAT(rho.trace().real(), WithinAbs(1.0, 1e-15));
        const Polarization3 got = ed::polarization(ed::reduce_to_system(rho));
        CHECK_THAT(got.px, WithinAbs(p0.px, 1e-15));
        CHECK_THAT(got.py, WithinAbs(p0.py, 1e-15));
        CHECK_THAT(got.pz, WithinAbs(p0.pz, 1e-15));
    }
    const ed::DenseState pure = ed::initial_state(Bath::ZeroT, {0.6, 0.0, 0.8}, 4);
    CHECK(pure.is_pure());
    CHECK_THAT(pure.purity(), WithinAbs(1.0, 1e-15));
    // bath spins all down: only index 0 and the site-1 bit carry weight
    CHECK(pure.vector()[0] != 0.0);
    CHECK(pure.vector()[8] != 0.0);
    CHECK(pure.vector().cwiseAbs2().sum() - std::norm(pure.vector()[0]) - std::norm(pure.vector()[8]) < 1e-30);
    CHECK_FALSE(ed::initial_state(Bath::InfiniteT, {0.0, 0.0, 1.0}, 4).is_pure());
    CHECK_THROWS_AS(ed::initial_state(Bath::InfiniteT, {0.9, 0.0, 0.9}, 4), ConfigError);
}

TEST_CASE("evolution agrees with a full-matrix propagator", "[ed_oracle]") {
    const ChainParams p(6, 1.0, 0.7, 2.0);
    const ed::EigenDecomposition eig = ed::diagonalize(p);
    const Eigen::MatrixXd H = ed::build_hamiltonian(p);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> full(H);
    std::mt19937_64 rng(3);
    const Eigen::MatrixXcd rho0 = random_density(6, rng, false);
    for (double t : {0.0, 0.7, 5.3}) {
        const Eigen::VectorXcd ph = (full.eigenvalues().cast<cd>() * cd(0, -t)).array().exp();
        const Eigen::MatrixXcd U = full.eigenvectors().cast<cd>() * ph.asDiagonal() * full.eigenvectors().transpose().cast<cd>();
        const Eigen::MatrixXcd want = U * rho0 * U.adjoint();
        const Eigen::MatrixXcd got = ed::evolve(ed::DenseState::mixed(rho0), eig, t).matrix();
        CHECK((want - got).cwiseAbs().maxCoeff() < 1e-12);
    }
    // U(t1) U(t2) = U(t1 + t2)
    const ed::DenseState s = ed::DenseState::mixed(rho0);
    const Eigen::MatrixXcd twice = ed::evolve(ed::evolve(s, eig, 1.25), eig, 2.5).matrix();
    CHECK((twice - ed::evolve(s, eig, 3.75).matrix()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("pure and mixed paths give the same polarization series", "[ed_oracle]") {
    const ChainParams p(6, 1.0, 0.3, 3.0);
    const ed::EigenDecomposition eig = ed::diagonalize(p);
    const ed::DenseState psi = ed::initial_state(Bath::ZeroT, {0.6, 0.0, 0.8}, 6);
    const ed::DenseState rho = ed::DenseState::mixed(psi.density());
    const std::vector<double> grid = uniform_grid(8.0, 33);
    const ed::PolarizationSeries a = ed::polarization_series(eig, psi, grid);
    const ed::PolarizationSeries b = ed::polarization_series(eig, rho, grid);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        CHECK_THAT(a.px[i], WithinAbs(b.px[i], 1e-12));
        CHECK_THAT(a.py[i], WithinAbs(b.py[i], 1e-12));
        CHECK_THAT(a.pz[i], WithinAbs(b.pz[i], 1e-12));
        // and both agree with explicit evolution followed by the partial trace
        const Polarization3 direct = ed::polarization(ed::reduce_to_system(ed::evolve(psi, eig, grid[i])));
        CHECK_THAT(a.px[i], WithinAbs(direct.px, 1e-12));
        CHECK_THAT(a.pz[i], WithinAbs(direct.pz, 1e-12));
    }
}

TEST_CASE("oracle trajectory and audit", "[ed_oracle]") {
    const ChainParams p(6, 1.0, 0.5, 2.0);
    const std::vector<double> grid = uniform_grid(20.0, 41);
    const Trajectory tr = ed::oracle_trajectory(p, Bath::InfiniteT, {0.0, 0.0, 1.0}, grid);
    CHECK(tr.meta.method == Method::EdOracle);
    REQUIRE(tr.audit);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        CHECK_THAT(tr.pz[i], WithinAbs(pz_closed_form(p, 1.0, grid[i]), 1e-12));
        CHECK_THAT(tr.px[i], WithinAbs(0.0, 1e-14));
        CHECK_THAT(tr.audit->energy[i], WithinAbs(tr.audit->energy[0], 1e-12));
        CHECK_THAT(tr.audit->purity[i], WithinAbs(tr.audit->purity[0], 1e-12));
        CHECK_THAT(tr.audit->parity[i], WithinAbs(tr.audit->parity[0], 1e-12));
    }
    // (1 + sigma^z)/2 x 1/2^{N-1}
    CHECK_THAT(tr.audit->purity[0], WithinAbs(1.0 / 32.0, 1e-15));
}

TEST_CASE("oracle caps", "[ed_oracle]") {
    CHECK_THROWS_AS(ed::build_hamiltonian(ChainParams(14, 1.0, 0.0, 5.0)), CapExceeded);
    CHECK_THROWS_AS(ed::check_cap("x", 12, 15), CapExceeded);
    CHECK_THROWS_AS(ed::oracle_trajectory(ChainParams(16, 1.0, 0.0, 5.0), Bath::ZeroT, {0, 0, 1}, {0.0}, 14),
                    CapExceeded);
    CHECK_NOTHROW(ed::check_cap("x", 14, 14));
}

TEST_CASE("Jordan-Wigner and Bogolyubov operators are canonical fermions", "[ed_oracle]") {
    const ChainParams p(4, 1.0, 0.6, 2.0);
    const ed::FermionOperators ops(p);
    const Eigen::MatrixXcd I = Eigen::MatrixXcd::Identity(16, 16);
    for (int i = 1; i <= 4; ++i) {
        for (int j = 1; j <= 4; ++j) {
            const Eigen::MatrixXcd ai = dense(ops.a_minus(i)), aj = dense(ops.a_minus(j));
            const Eigen::MatrixXcd anti = ai * aj.adjoint() + aj.adjoint() * ai;
            CHECK((anti - (i == j ? I : Eigen::MatrixXcd::Zero(16, 16))).cwiseAbs().maxCoeff() < 1e-14);
            CHECK((ai * aj + aj * ai).cwiseAbs().maxCoeff() < 1e-14);
        }
    }
    for (Parity par : {Parity::Odd, Parity::Even}) {
        for (auto q : make_sector(4, par).momenta) {
            for (auto k : make_sector(4, par).momenta) {
                const Eigen::MatrixXcd cq = dense(ops.c_minus(q)), ck = dense(ops.c_minus(k));
                const Eigen::MatrixXcd anti = cq * ck.adjoint() + ck.adjoint() * cq;
                CHECK((anti - (q == k ? I : Eigen::MatrixXcd::Zero(16, 16))).cwiseAbs().maxCoeff() < 1e-13);
            }
        }
    }
}

TEST_CASE("free-fermion Hamiltonian equals the spin Hamiltonian", "[ed_oracle]") {
    for (double gamma : {0.0, 0.5, 1.0}) {
        const ChainParams p(6, 1.0, gamma, 2.0);
        const ed::FermionOperators ops(p);
        const Eigen::MatrixXcd Hf = dense(ops.free_fermion_hamiltonian());
        CHECK((Hf - ed::build_hamiltonian(p).cast<cd>()).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("free-fermion eigenstates", "[ed_oracle]") {
    const ChainParams p(6, 1.0, 1.0, 2.0);
    const ed::FermionOperators ops(p);
    const Eigen::MatrixXcd H = ed::build_hamiltonian(p).cast<cd>();
    const Eigen::MatrixXcd Pi = dense(ops.parity());
    for (Parity par : {Parity::Odd, Parity::Even}) {
        for (std::uint64_t m = 0; m < 64; ++m) {
            if ((std::popcount(m) % 2 == 1) != (par == Parity::Odd)) continue;
            const FermionConfig c(ops.table(par).sector(), m);
            const Eigen::VectorXcd v = ops.eigenstate(c);
            CHECK_THAT(v.norm(), WithinAbs(1.0, 1e-14));
            CHECK((H * v - ops.eigen_energy(c) * v).norm() < 1e-12);
            // odd fermion number lives in the Pi = -1 spin sector
            CHECK_THAT(v.dot(Pi * v).real(), WithinAbs(par == Parity::Odd ? -1.0 : 1.0, 1e-12));
        }
    }
}

TEST_CASE("forbidden sigma^z matrix elements vanish", "[ed_oracle]") {
    const ChainParams p(6, 1.0, 1.0, 2.0);
    const ed::FermionOperators ops(p);
    const MomentumSector& s = ops.table(Parity::Odd).sector();
    const FermionConfig Q(s, std::vector<Momentum>{Momentum{-2}, Momentum{0}, Momentum{2}});
    // three momenta changed at once
    const FermionConfig far(s, std::vector<Momentum>{Momentum{-4}, Momentum{4}, Momentum{6}});
    CHECK(std::abs(ed::eigen_matrix_element(ops, far, Q, ed::Pauli::Z)) < 1e-12);
    // an even sector state
    const FermionConfig ev(ops.table(Parity::Even).sector(), std::uint64_t{0});
    CHECK(std::abs(ed::eigen_matrix_element(ops, ev, Q, ed::Pauli::Z)) < 1e-12);
}
