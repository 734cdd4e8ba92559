#pragma once

// Torus embeddings K : T^n x T^ell -> R^{2n}, stored as an integer winding part plus
// periodic Fourier series:
//
//     K_i(theta, phi) = sum_j W_ij * theta_j + u_i(theta, phi).
//
// The winding matrix W (2n x n) carries the non-periodic angle dependence of graphs
// over the base torus — the rotator K = (theta, omega) has W = [[1],[0]] — and stays
// fixed under all corrections, which are purely periodic.

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "kamtori/matrixseries.hpp"

namespace kamtori {

struct TorusEmbedding {
    TorusDims dims;
    std::vector<std::vector<int>> winding;  // 2n rows, n columns
    std::vector<FourierSeries> comp;        // 2n periodic parts, shared layout

    int phase_dim() const { return 2 * dims.n; }
    const std::vector<int>& trunc() const { return comp.front().trunc(); }
};

void validate(const TorusEmbedding& K);

// W = [I; 0]: the first n phase-space coordinates are angles lifted from the base.
std::vector<std::vector<int>> graph_winding(int n);

// Zero embedding with the given layout and winding.
TorusEmbedding zero_embedding(TorusDims dims, std::vector<int> trunc,
                              std::vector<std::vector<int>> winding);

// Phase-space values at the nodes of a grid (2n x 1 blocks).
MatrixGrid embedding_grid(const TorusEmbedding& K, const std::vector<int>& shape);

// Value at one point; angles may be unreduced (lifted), the periodic part wraps them.
Eigen::VectorXd evaluate(const TorusEmbedding& K, const std::vector<double>& angles);

// Adds a periodic correction (2n x 1 matrix series with K's layout) in place.
void add_correction(TorusEmbedding& K, const MatrixSeries& delta);

// Serialization: <basename>.manifest plus one coefficient file per component.
void write_embedding(const std::string& dir, const std::string& basename,
                     const TorusEmbedding& K);
TorusEmbedding read_embedding(const std::string& manifest_path);

}  // namespace kamtori
