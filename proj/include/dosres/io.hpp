#pragma once

// System documents (JSON) and built-in test systems.
//
// Document layout, block keys 1-based, blocks as row-major arrays of rows:
//
//   {
//     "name": "example",
//     "subsystems": [ {"n": 2, "m": 1}, ... ],
//     "A_blocks": { "1,1": [[...], [...]], "1,2": ... },
//     "B_blocks": { "1": [[...], [...]] },
//     "K_blocks": { "1,2": [[...]] }
//   }
//
// Diagonal A blocks are required and B_i is required when m_i > 0. Missing
// off-diagonal A blocks and missing K blocks are zero.

#include <cstdint>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dosres/model.hpp"
#include "dosres/spectra.hpp"

namespace dosres {

class DocumentError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct NamedSystem {
    std::string name;
    BlockSystem system;
};

namespace detail {

inline Matrix parse_block(const nlohmann::json& v, int rows, int cols, const std::string& name) {
    if (!v.is_array()) throw DocumentError(name + ": block must be an array of rows");
    const auto r = static_cast<int>(v.size());
    if (r == 0) {
        if (rows != 0) throw ShapeError(name + ": expected " + shape_str(rows, cols) + ", got 0 rows");
        return Matrix::Zero(0, cols);
    }
    int c = -1;
    for (const auto& row : v) {
        if (!row.is_array()) throw DocumentError(name + ": block must be an array of rows");
        if (c < 0) c = static_cast<int>(row.size());
        if (static_cast<int>(row.size()) != c) throw DocumentError(name + ": ragged rows");
    }
    if (r != rows || c != cols) throw ShapeError(name + ": expected " + shape_str(rows, cols) + ", got " + shape_str(r, c));
    Matrix M(r, c);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) {
            const auto& x = v[i][j];
            if (!x.is_number()) throw DocumentError(name + ": non-numeric entry at (" + std::to_string(i + 1) + "," +
                                                    std::to_string(j + 1) + ")");
            M(i, j) = x.get<double>();
        }
    return M;
}

inline nlohmann::json block_json(const Matrix& M) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline std::pair<int, int> line_column(const std::string& text, std::size_t byte) {
    int line = 1, col = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

}  // namespace detail

inline NamedSystem parse_system(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        const auto [line, col] = detail::line_column(text, e.byte == 0 ? 0 : e.byte - 1);
        throw DocumentError("syntax error at line " + std::to_string(line) + ", column " + std::to_string(col) + ": " +
                            e.what());
    }
    if (!doc.is_object()) throw DocumentError("document must be a JSON object");
    if (!doc.contains("subsystems") || !doc["subsystems"].is_array() || doc["subsystems"].empty())
        throw DocumentError("\"subsystems\" must be a non-empty array");

    std::vector<int> n_dims, m_dims;
    for (const auto& s : doc["subsystems"]) {
        if (!s.is_object() || !s.contains("n") || !s["n"].is_number_integer())
            throw DocumentError("each subsystem needs an integer \"n\"");
        const int n = s["n"].get<int>();
        const int m = s.contains("m") ? s["m"].get<int>() : 0;
        if (n < 1) throw DocumentError("subsystem " + std::to_string(n_dims.size() + 1) + ": n must be positive");
        if (m < 0) throw DocumentError("subsystem " + std::to_string(n_dims.size() + 1) + ": m must be non-negative");
        n_dims.push_back(n);
        m_dims.push_back(m);
    }
    const int N = static_cast<int>(n_dims.size());
    NamedSystem out{doc.value("name", std::string{}), BlockSystem::zeros(n_dims, m_dims)};
    BlockSystem& sys = out.system;

    auto section = [&](const char* key) -> nlohmann::json {
        if (!doc.contains(key)) return nlohmann::json::object();
        if (!doc[key].is_object()) throw DocumentError(std::string("\"") + key + "\" must be an object");
        return doc[key];
    };
    auto pair_key = [N](const std::string& key, const std::string& sec) {
        int i = 0, j = 0;
        char comma = 0;
        std::istringstream is(key);
        if (!(is >> i >> comma >> j) || comma != ',' || !is.eof() || i < 1 || j < 1 || i > N || j > N)
            throw DocumentError(sec + ": bad block key \"" + key + "\"");
        return std::pair{i - 1, j - 1};
    };

    const auto A = section("A_blocks");
    for (auto it = A.begin(); it != A.end(); ++it) {
        const auto [i, j] = pair_key(it.key(), "A_blocks");
        sys.A_blocks[i][j] = detail::parse_block(it.value(), n_dims[i], n_dims[j], "A_" + it.key());
    }
    for (int i = 0; i < N; ++i) {
        const std::string key = std::to_string(i + 1) + "," + std::to_string(i + 1);
        if (!A.contains(key)) throw DocumentError("A_" + key + ": diagonal block missing");
    }

    const auto B = section("B_blocks");
    for (auto it = B.begin(); it != B.end(); ++it) {
        int i = 0;
        try {
            std::size_t used = 0;
            i = std::stoi(it.key(), &used) - 1;
            if (used != it.key().size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw DocumentError("B_blocks: bad block key \"" + it.key() + "\"");
        }
        if (i < 0 || i >= N) throw DocumentError("B_blocks: bad block key \"" + it.key() + "\"");
        sys.B_blocks[i] = detail::parse_block(it.value(), n_dims[i], m_dims[i], "B_" + it.key());
    }
    for (int i = 0; i < N; ++i)
        if (m_dims[i] > 0 && !B.contains(std::to_string(i + 1)))
            throw DocumentError("B_" + std::to_string(i + 1) + ": block missing for a controlled subsystem");

    const auto K = section("K_blocks");
    for (auto it = K.begin(); it != K.end(); ++it) {
        const auto [i, j] = pair_key(it.key(), "K_blocks");
        sys.K_blocks[i][j] = detail::parse_block(it.value(), m_dims[i], n_dims[j], "K_" + it.key());
    }
    validate(sys);
    return out;
}

inline std::string serialize_system(const BlockSystem& sys, const std::string& name = {}) {
    validate(sys);
    nlohmann::json doc;
    doc["name"] = name;
    doc["subsystems"] = nlohmann::json::array();
    const int N = sys.subsystems();
    for (int i = 0; i < N; ++i) doc["subsystems"].push_back({{"n", sys.state_dims[i]}, {"m", sys.input_dims[i]}});
    nlohmann::json A = nlohmann::json::object(), B = nlohmann::json::object(), K = nlohmann::json::object();
    for (int i = 0; i < N; ++i) {
        for (int j = 0; j < N; ++j) {
            const std::string key = std::to_string(i + 1) + "," + std::to_string(j + 1);
            if (i == j || !sys.A_blocks[i][j].isZero(0.0)) A[key] = detail::block_json(sys.A_blocks[i][j]);
            if (sys.input_dims[i] > 0 && !sys.K_blocks[i][j].isZero(0.0)) K[key] = detail::block_json(sys.K_blocks[i][j]);
        }
        if (sys.input_dims[i] > 0) B[std::to_string(i + 1)] = detail::block_json(sys.B_blocks[i]);
    }
    doc["A_blocks"] = A;
    doc["B_blocks"] = B;
    doc["K_blocks"] = K;
    return doc.dump(2) + "\n";
}

inline NamedSystem read_system_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DocumentError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_system(ss.str());
}

/// The three-subsystem example with no physical coupling whose gain is
/// destabilized by cutting channel 3 -> 2. Nominal closed loop
/// [E1 E2 -E1; E1 E2 -2E1; -E1 E2 2E1], decentralized part diag(E1, E2, 2E1).
inline BlockSystem motivating_system() {
    Matrix E1(2, 2), E2(2, 2);
    E1 << -3, -1, 12, 2;
    E2 << -3, 1, -12, 2;
    BlockSystem sys = BlockSystem::zeros({2, 2, 2}, {2, 2, 2});
    sys.A_blocks[0][0] = 0.5 * E1;
    sys.A_blocks[1][1] = 0.5 * E2;
    sys.A_blocks[2][2] = E1;
    for (auto& B : sys.B_blocks) B = Matrix::Identity(2, 2);
    auto& K = sys.K_blocks;
    // 2K11 = -K13 = K21 = -K23/2 = -K31 = K33 = E1,  K12 = 2K22 = K32 = E2
    K[0][0] = 0.5 * E1;
    K[0][2] = -E1;
    K[1][0] = E1;
    K[1][2] = -2.0 * E1;
    K[2][0] = -E1;
    K[2][2] = E1;
    K[0][1] = E2;
    K[1][1] = 0.5 * E2;
    K[2][1] = E2;
    return sys;
}

/**
 * Seeded random system: N subsystems with n_i in {1,2,3}, m_i in {1,2},
 * sparse physical coupling, dense gain. A is shifted by (sigma + 0.1) I,
 * sigma the nominal closed-loop abscissa, so the nominal loop has abscissa -0.1.
 */
inline BlockSystem random_system(std::uint64_t seed, int N) {
    if (N < 1) throw std::invalid_argument("random system needs N >= 1");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> n_dist(1, 3), m_dist(1, 2);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<int> n_dims(N), m_dims(N);
    for (int i = 0; i < N; ++i) {
        n_dims[i] = n_dist(rng);
        m_dims[i] = m_dist(rng);
    }
    auto fill = [&](Matrix& M, double scale) {
        for (Eigen::Index r = 0; r < M.rows(); ++r)
            for (Eigen::Index c = 0; c < M.cols(); ++c) M(r, c) = scale * normal(rng);
    };
    BlockSystem sys = BlockSystem::zeros(n_dims, m_dims);
    for (int i = 0; i < N; ++i) {
        for (int j = 0; j < N; ++j) {
            if (i == j) {
                fill(sys.A_blocks[i][j], 1.0);
            } else if (coin(rng) < 0.5) {
                fill(sys.A_blocks[i][j], 0.3);
            }
            fill(sys.K_blocks[i][j], 0.5);
        }
        fill(sys.B_blocks[i], 1.0);
    }
    const double sigma = spectral_abscissa(assemble_A(sys) + assemble_B(sys) * assemble_K(sys));
    for (int i = 0; i < N; ++i)
        sys.A_blocks[i][i] -= (sigma + 0.1) * Matrix::Identity(n_dims[i], n_dims[i]);
    return sys;
}

/// "motivating" or "random:<seed>:<N>".
inline NamedSystem builtin(const std::string& name) {
    if (name == "motivating") return {name, motivating_system()};
    if (name.rfind("random:", 0) == 0) {
        const auto second = name.find(':', 7);
        if (second != std::string::npos) {
            try {
                std::size_t u1 = 0, u2 = 0;
                const std::string seed_s = name.substr(7, second - 7), n_s = name.substr(second + 1);
                const auto seed = std::stoull(seed_s, &u1);
                const int N = std::stoi(n_s, &u2);
                if (u1 == seed_s.size() && u2 == n_s.size() && N >= 1) return {name, random_system(seed, N)};
            } catch (const std::logic_error&) {
            }
        }
        throw DocumentError("builtin random systems are named random:<seed>:<N>, got \"" + name + "\"");
    }
    throw DocumentError("unknown builtin system \"" + name + "\"");
}

inline bool is_builtin_name(const std::string& s) { return s == "motivating" || s.rfind("random:", 0) == 0; }

/// Builtin name or path to a system document.
inline NamedSystem load_system(const std::string& source) {
    return is_builtin_name(source) ? builtin(source) : read_system_file(source);
}

}  // namespace dosres
