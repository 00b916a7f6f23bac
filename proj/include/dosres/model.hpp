#pragma once

// Block-structured networked systems, attack strategies and the lifted
// affine parameterization of the post-attack closed loop.

#include <cmath>
#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace dosres {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Raised when a block does not have the shape implied by the subsystem dimensions.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised for strategy matrices violating unit diagonal or range constraints.
class StrategyError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/**
 * Plant plus structured controller, stored block by block.
 *
 * A_blocks[i][j] is n_i x n_j, B_blocks[i] is n_i x m_i and K_blocks[i][j]
 * is m_i x n_j. Indices are 0-based in code; user-facing text is 1-based.
 */
struct BlockSystem {
    std::vector<int> state_dims;
    std::vector<int> input_dims;
    std::vector<std::vector<Matrix>> A_blocks;
    std::vector<Matrix> B_blocks;
    std::vector<std::vector<Matrix>> K_blocks;

    [[nodiscard]] int subsystems() const { return static_cast<int>(state_dims.size()); }

    [[nodiscard]] int states() const {
        int n = 0;
        for (int d : state_dims) n += d;
        return n;
    }

    [[nodiscard]] int inputs() const {
        int m = 0;
        for (int d : input_dims) m += d;
        return m;
    }

    [[nodiscard]] int state_offset(int i) const {
        int off = 0;
        for (int k = 0; k < i; ++k) off += state_dims[k];
        return off;
    }

    [[nodiscard]] int input_offset(int i) const {
        int off = 0;
        for (int k = 0; k < i; ++k) off += input_dims[k];
        return off;
    }

    /// Zero-filled system with the given partition.
    static BlockSystem zeros(std::vector<int> n_dims, std::vector<int> m_dims) {
        BlockSystem sys;
        const std::size_t N = n_dims.size();
        sys.state_dims = std::move(n_dims);
        sys.input_dims = std::move(m_dims);
        sys.A_blocks.assign(N, std::vector<Matrix>(N));
        sys.K_blocks.assign(N, std::vector<Matrix>(N));
        sys.B_blocks.resize(N);
        for (std::size_t i = 0; i < N; ++i) {
            sys.B_blocks[i] = Matrix::Zero(sys.state_dims[i], sys.input_dims[i]);
            for (std::size_t j = 0; j < N; ++j) {
                sys.A_blocks[i][j] = Matrix::Zero(sys.state_dims[i], sys.state_dims[j]);
                sys.K_blocks[i][j] = Matrix::Zero(sys.input_dims[i], sys.state_dims[j]);
            }
        }
        return sys;
    }
};

namespace detail {

inline std::string shape_str(Eigen::Index r, Eigen::Index c) {
    std::ostringstream os;
    os << r << "x" << c;
    return os.str();
}

inline void check_block(const Matrix& M, Eigen::Index rows, Eigen::Index cols, const std::string& name) {
    if (M.rows() != rows || M.cols() != cols) {
        throw ShapeError(name + ": expected " + shape_str(rows, cols) + ", got " +
                         shape_str(M.rows(), M.cols()));
    }
    if (!M.allFinite()) throw ShapeError(name + ": non-finite entry");
}

}  // namespace detail

/// Throws ShapeError naming the first offending block (1-based indices).
inline void validate(const BlockSystem& sys) {
    const int N = sys.subsystems();
    if (N < 1) throw ShapeError("system has no subsystems");
    if (static_cast<int>(sys.input_dims.size()) != N) {
        throw ShapeError("input_dims: expected " + std::to_string(N) + " entries, got " +
                         std::to_string(sys.input_dims.size()));
    }
    for (int i = 0; i < N; ++i) {
        if (sys.state_dims[i] < 1)
            throw ShapeError("subsystem " + std::to_string(i + 1) + ": state dimension must be positive");
        if (sys.input_dims[i] < 0)
            throw ShapeError("subsystem " + std::to_string(i + 1) + ": input dimension must be non-negative");
    }
    auto square_table = [N](const auto& t) {
        if (static_cast<int>(t.size()) != N) return false;
        for (const auto& row : t)
            if (static_cast<int>(row.size()) != N) return false;
        return true;
    };
    if (!square_table(sys.A_blocks)) throw ShapeError("A_blocks: expected an NxN table of blocks");
    if (!square_table(sys.K_blocks)) throw ShapeError("K_blocks: expected an NxN table of blocks");
    if (static_cast<int>(sys.B_blocks.size()) != N) throw ShapeError("B_blocks: expected N blocks");

    for (int i = 0; i < N; ++i) {
        for (int j = 0; j < N; ++j) {
            const std::string ij = std::to_string(i + 1) + "," + std::to_string(j + 1);
            detail::check_block(sys.A_blocks[i][j], sys.state_dims[i], sys.state_dims[j], "A_" + ij);
        }
        detail::check_block(sys.B_blocks[i], sys.state_dims[i], sys.input_dims[i], "B_" + std::to_string(i + 1));
        for (int j = 0; j < N; ++j) {
            const std::string ij = std::to_string(i + 1) + "," + std::to_string(j + 1);
            detail::check_block(sys.K_blocks[i][j], sys.input_dims[i], sys.state_dims[j], "K_" + ij);
        }
    }
}

/// Assembled n x n open-loop matrix.
inline Matrix assemble_A(const BlockSystem& sys) {
    const int N = sys.subsystems();
    Matrix A(sys.states(), sys.states());
    for (int i = 0, r = 0; i < N; r += sys.state_dims[i], ++i)
        for (int j = 0, c = 0; j < N; c += sys.state_dims[j], ++j)
            A.block(r, c, sys.state_dims[i], sys.state_dims[j]) = sys.A_blocks[i][j];
    return A;
}

/// Assembled block-diagonal n x m input matrix.
inline Matrix assemble_B(const BlockSystem& sys) {
    Matrix B = Matrix::Zero(sys.states(), sys.inputs());
    for (int i = 0, r = 0, c = 0; i < sys.subsystems(); ++i) {
        B.block(r, c, sys.state_dims[i], sys.input_dims[i]) = sys.B_blocks[i];
        r += sys.state_dims[i];
        c += sys.input_dims[i];
    }
    return B;
}

/// Assembled m x n gain with every block (i,j) scaled by weights(i,j).
inline Matrix assemble_K(const BlockSystem& sys, const Matrix& weights) {
    const int N = sys.subsystems();
    Matrix K(sys.inputs(), sys.states());
    for (int i = 0, r = 0; i < N; r += sys.input_dims[i], ++i)
        for (int j = 0, c = 0; j < N; c += sys.state_dims[j], ++j)
            K.block(r, c, sys.input_dims[i], sys.state_dims[j]) = weights(i, j) * sys.K_blocks[i][j];
    return K;
}

inline Matrix assemble_K(const BlockSystem& sys) {
    return assemble_K(sys, Matrix::Ones(sys.subsystems(), sys.subsystems()));
}

/// Pure strategy: entries in {0,1}, unit diagonal. alpha(i,j) = 0 cuts the channel j -> i.
class AttackStrategy {
public:
    explicit AttackStrategy(Matrix alpha) : alpha_(std::move(alpha)) {
        if (alpha_.rows() != alpha_.cols()) throw StrategyError("strategy matrix must be square");
        for (Eigen::Index i = 0; i < alpha_.rows(); ++i) {
            if (alpha_(i, i) != 1.0) throw StrategyError("strategy diagonal must be 1");
            for (Eigen::Index j = 0; j < alpha_.cols(); ++j)
                if (alpha_(i, j) != 0.0 && alpha_(i, j) != 1.0)
                    throw StrategyError("pure strategy entries must be 0 or 1");
        }
    }

    static AttackStrategy nominal(int N) { return AttackStrategy(Matrix::Ones(N, N)); }

    [[nodiscard]] const Matrix& matrix() const { return alpha_; }
    [[nodiscard]] int size() const { return static_cast<int>(alpha_.rows()); }
    [[nodiscard]] double operator()(int i, int j) const { return alpha_(i, j); }

    friend bool operator==(const AttackStrategy& a, const AttackStrategy& b) { return a.alpha_ == b.alpha_; }

private:
    Matrix alpha_;
};

/// Relaxed strategy: off-diagonal entries in [0,1], unit diagonal.
class RelaxedStrategy {
public:
    explicit RelaxedStrategy(Matrix alpha) : alpha_(std::move(alpha)) {
        if (alpha_.rows() != alpha_.cols()) throw StrategyError("strategy matrix must be square");
        for (Eigen::Index i = 0; i < alpha_.rows(); ++i) {
            if (alpha_(i, i) != 1.0) throw StrategyError("strategy diagonal must be 1");
            for (Eigen::Index j = 0; j < alpha_.cols(); ++j)
                if (!(alpha_(i, j) >= 0.0 && alpha_(i, j) <= 1.0))
                    throw StrategyError("relaxed strategy entries must lie in [0,1]");
        }
    }

    RelaxedStrategy(const AttackStrategy& pure) : alpha_(pure.matrix()) {}  // NOLINT: pure strategies are relaxed ones

    static RelaxedStrategy nominal(int N) { return RelaxedStrategy(Matrix::Ones(N, N)); }

    [[nodiscard]] const Matrix& matrix() const { return alpha_; }
    [[nodiscard]] int size() const { return static_cast<int>(alpha_.rows()); }
    [[nodiscard]] double operator()(int i, int j) const { return alpha_(i, j); }

private:
    Matrix alpha_;
};

/// A(alpha) = A + B (K o alpha).
inline Matrix closed_loop(const BlockSystem& sys, const RelaxedStrategy& alpha) {
    if (alpha.size() != sys.subsystems())
        throw StrategyError("strategy size does not match subsystem count");
    return assemble_A(sys) + assemble_B(sys) * assemble_K(sys, alpha.matrix());
}

/**
 * Lifted form K o alpha = K_tilde * alpha_tilde with alpha_tilde = sum alpha_ij M_ij.
 *
 * K_tilde is m x (nN), block-diagonal with j-th block [K_j1 | ... | K_jN].
 * M_ij is (nN) x n and places I_{n_j} at row (i-1)n + off_j, column off_j.
 */
struct LiftedForm {
    Matrix K_tilde;
    std::vector<std::vector<Matrix>> selectors;

    [[nodiscard]] Matrix alpha_tilde(const Matrix& alpha) const {
        const auto N = static_cast<Eigen::Index>(selectors.size());
        Matrix out = Matrix::Zero(selectors[0][0].rows(), selectors[0][0].cols());
        for (Eigen::Index i = 0; i < N; ++i)
            for (Eigen::Index j = 0; j < N; ++j) out += alpha(i, j) * selectors[i][j];
        return out;
    }
};

inline LiftedForm lifted_form(const BlockSystem& sys) {
    const int N = sys.subsystems();
    const int n = sys.states();
    LiftedForm lf;
    lf.K_tilde = Matrix::Zero(sys.inputs(), static_cast<Eigen::Index>(n) * N);
    for (int j = 0, r = 0; j < N; r += sys.input_dims[j], ++j)
        for (int k = 0, c = j * n; k < N; c += sys.state_dims[k], ++k)
            lf.K_tilde.block(r, c, sys.input_dims[j], sys.state_dims[k]) = sys.K_blocks[j][k];

    lf.selectors.assign(N, std::vector<Matrix>(N));
    for (int i = 0; i < N; ++i) {
        for (int j = 0; j < N; ++j) {
            Matrix M = Matrix::Zero(static_cast<Eigen::Index>(n) * N, n);
            const int off = sys.state_offset(j);
            M.block(static_cast<Eigen::Index>(i) * n + off, off, sys.state_dims[j], sys.state_dims[j]).setIdentity();
            lf.selectors[i][j] = std::move(M);
        }
    }
    return lf;
}

}  // namespace dosres
