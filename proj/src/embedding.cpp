#include "kamtori/embedding.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "kamtori/errors.hpp"

namespace kamtori {

void validate(const TorusEmbedding& K) {
    validate(K.dims);
    const int m = K.phase_dim();
    if (static_cast<int>(K.comp.size()) != m)
        throw std::invalid_argument("embedding needs 2n components, has " +
                                    std::to_string(K.comp.size()));
    if (static_cast<int>(K.winding.size()) != m)
        throw std::invalid_argument("embedding winding needs 2n rows");
    for (const auto& row : K.winding)
        if (static_cast<int>(row.size()) != K.dims.n)
            throw std::invalid_argument("embedding winding rows need n columns");
    for (const auto& c : K.comp) {
        if (!(c.dims() == K.dims) || c.trunc() != K.comp.front().trunc())
            throw std::invalid_argument("embedding components must share one layout");
    }
}

std::vector<std::vector<int>> graph_winding(int n) {
    std::vector<std::vector<int>> w(static_cast<std::size_t>(2 * n),
                                    std::vector<int>(static_cast<std::size_t>(n), 0));
    for (int i = 0; i < n; ++i) w[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] = 1;
    return w;
}

TorusEmbedding zero_embedding(TorusDims dims, std::vector<int> trunc,
                              std::vector<std::vector<int>> winding) {
    TorusEmbedding K;
    K.dims = dims;
    K.winding = std::move(winding);
    K.comp.reserve(static_cast<std::size_t>(2 * dims.n));
    for (int i = 0; i < 2 * dims.n; ++i) K.comp.emplace_back(dims, trunc);
    validate(K);
    return K;
}

MatrixGrid embedding_grid(const TorusEmbedding& K, const std::vector<int>& shape) {
    validate(K);
    const int m = K.phase_dim();
    MatrixGrid out(K.dims, shape, m, 1);
    for (int i = 0; i < m; ++i) {
        const GridFunction g = inverse_transform(K.comp[static_cast<std::size_t>(i)], shape);
        for (std::size_t node = 0; node < g.node_count(); ++node) out.at(node, i, 0) = g[node];
    }
    // Winding part: theta_j = node angle of axis j, j < n.
    GridFunction probe(K.dims, shape);
    for (std::size_t node = 0; node < probe.node_count(); ++node) {
        const std::vector<double> x = probe.node_angles(node);
        for (int i = 0; i < m; ++i) {
            double lin = 0.0;
            for (int j = 0; j < K.dims.n; ++j)
                lin += K.winding[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] *
                       x[static_cast<std::size_t>(j)];
            out.at(node, i, 0) += lin;
        }
    }
    return out;
}

Eigen::VectorXd evaluate(const TorusEmbedding& K, const std::vector<double>& angles) {
    if (static_cast<int>(angles.size()) != K.dims.d())
        throw std::invalid_argument("embedding evaluation point has wrong angle count");
    std::vector<double> wrapped(angles.size());
    for (std::size_t j = 0; j < angles.size(); ++j) {
        wrapped[j] = angles[j] - std::floor(angles[j]);
    }
    const int m = K.phase_dim();
    Eigen::VectorXd z(m);
    for (int i = 0; i < m; ++i) {
        double lin = 0.0;
        for (int j = 0; j < K.dims.n; ++j)
            lin += K.winding[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] *
                   angles[static_cast<std::size_t>(j)];  // unreduced: lifts wind up
        z(i) = lin + evaluate(K.comp[static_cast<std::size_t>(i)], wrapped);
    }
    return z;
}

void add_correction(TorusEmbedding& K, const MatrixSeries& delta) {
    if (delta.rows != K.phase_dim() || delta.cols != 1)
        throw std::invalid_argument("embedding correction must be a 2n x 1 series");
    for (int i = 0; i < K.phase_dim(); ++i)
        K.comp[static_cast<std::size_t>(i)] += delta.at(i, 0);
}

void write_embedding(const std::string& dir, const std::string& basename,
                     const TorusEmbedding& K) {
    validate(K);
    namespace fs = std::filesystem;
    const fs::path root(dir);
    std::ofstream manifest(root / (basename + ".manifest"));
    if (!manifest) throw ConfigError("cannot open embedding manifest for writing in " + dir);
    manifest << "embedding " << K.dims.n << " " << K.dims.ell << "\n";
    for (int i = 0; i < K.phase_dim(); ++i) {
        manifest << "winding";
        for (int j = 0; j < K.dims.n; ++j)
            manifest << " " << K.winding[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        manifest << "\n";
    }
    for (int i = 0; i < K.phase_dim(); ++i) {
        std::ostringstream name;
        name << basename << "_" << i << ".coef";
        manifest << "component " << i << " " << name.str() << "\n";
        write_series_file((root / name.str()).string(), K.comp[static_cast<std::size_t>(i)]);
    }
}

TorusEmbedding read_embedding(const std::string& manifest_path) {
    namespace fs = std::filesystem;
    std::ifstream in(manifest_path);
    if (!in) throw ConfigError("cannot open " + manifest_path);
    std::string word;
    TorusEmbedding K;
    if (!(in >> word >> K.dims.n >> K.dims.ell) || word != "embedding")
        throw ConfigError("embedding manifest: expected 'embedding <n> <ell>' header");
    validate(K.dims);
    const int m = 2 * K.dims.n;
    K.winding.assign(static_cast<std::size_t>(m),
                     std::vector<int>(static_cast<std::size_t>(K.dims.n), 0));
    for (int i = 0; i < m; ++i) {
        if (!(in >> word) || word != "winding")
            throw ConfigError("embedding manifest: expected winding row");
        for (int j = 0; j < K.dims.n; ++j)
            if (!(in >> K.winding[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]))
                throw ConfigError("embedding manifest: bad winding row");
    }
    const fs::path root = fs::path(manifest_path).parent_path();
    K.comp.resize(static_cast<std::size_t>(m));
    int seen = 0;
    int idx = 0;
    std::string name;
    while (in >> word >> idx >> name) {
        if (word != "component" || idx < 0 || idx >= m)
            throw ConfigError("embedding manifest: bad component line");
        K.comp[static_cast<std::size_t>(idx)] = read_series_file((root / name).string());
        ++seen;
    }
    if (seen != m) throw ConfigError("embedding manifest: missing components");
    validate(K);
    return K;
}

}  // namespace kamtori
