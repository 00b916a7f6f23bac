#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Eigenvalues>

#include "dosres/model.hpp"

namespace dosres {

class EigenError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Eigenpair {
    double value = 0.0;
    Vector vector;
};

/// Full complex spectrum of a square real matrix.
inline Eigen::VectorXcd eigenvalues(const Matrix& M) {
    if (M.rows() != M.cols()) throw std::invalid_argument("eigenvalues: matrix must be square");
    if (!M.allFinite()) throw std::invalid_argument("eigenvalues: non-finite entry");
    Eigen::EigenSolver<Matrix> es(M, /*computeEigenvectors=*/false);
    if (es.info() != Eigen::Success) throw EigenError("eigenvalue iteration did not converge");
    return es.eigenvalues();
}

/// max Re(lambda) over the spectrum of M.
inline double spectral_abscissa(const Matrix& M) {
    return eigenvalues(M).real().maxCoeff();
}

/**
 * Largest eigenvalue of a symmetric matrix and a unit eigenvector.
 *
 * The input is symmetrized first. The returned vector's first entry whose
 * magnitude exceeds 1e-12 is positive.
 */
inline Eigenpair max_eigpair_sym(const Matrix& S) {
    if (S.rows() != S.cols()) throw std::invalid_argument("max_eigpair_sym: matrix must be square");
    const Matrix sym = 0.5 * (S + S.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
    if (es.info() != Eigen::Success) throw EigenError("symmetric eigensolver did not converge");
    const Eigen::Index top = sym.rows() - 1;  // eigenvalues come sorted ascending
    Eigenpair ep{es.eigenvalues()(top), es.eigenvectors().col(top)};
    ep.vector.normalize();
    for (Eigen::Index k = 0; k < ep.vector.size(); ++k) {
        if (std::abs(ep.vector(k)) > 1e-12) {
            if (ep.vector(k) < 0) ep.vector = -ep.vector;
            break;
        }
    }
    return ep;
}

/// Ascending eigenvalues of the symmetrized input.
inline Vector eigenvalues_sym(const Matrix& S) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (S + S.transpose()), Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw EigenError("symmetric eigensolver did not converge");
    return es.eigenvalues();
}

/// A^T P + P A.
inline Matrix lyapunov_operator(const Matrix& A, const Matrix& P) {
    return A.transpose() * P + P * A;
}

}  // namespace dosres
