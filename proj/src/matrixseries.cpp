#include "kamtori/matrixseries.hpp"

#include <Eigen/SVD>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "kamtori/cohomology.hpp"
#include "kamtori/errors.hpp"

namespace kamtori {

namespace {

void require_same_shape(const MatrixGrid& a, const MatrixGrid& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols() || a.shape() != b.shape())
        throw std::invalid_argument(std::string("matrix grid shape mismatch in ") + op);
}

void require_same_shape(const MatrixSeries& a, const MatrixSeries& b, const char* op) {
    if (a.rows != b.rows || a.cols != b.cols)
        throw std::invalid_argument(std::string("matrix series shape mismatch in ") + op);
}

}  // namespace

MatrixSeries::MatrixSeries(int r, int c, TorusDims dims, std::vector<int> trunc)
    : rows(r), cols(c) {
    if (r < 1 || c < 1) throw std::invalid_argument("matrix series needs positive dimensions");
    entries.reserve(static_cast<std::size_t>(r) * static_cast<std::size_t>(c));
    for (int i = 0; i < r * c; ++i) entries.emplace_back(dims, trunc);
}

MatrixGrid::MatrixGrid(TorusDims dims, std::vector<int> shape, int rows, int cols)
    : dims_(dims), shape_(std::move(shape)), rows_(rows), cols_(cols) {
    validate(dims_);
    if (rows_ < 1 || cols_ < 1)
        throw std::invalid_argument("matrix grid needs positive dimensions");
    nodes_ = 1;
    for (int M : shape_) {
        if (M < 1) throw std::invalid_argument("grid extents must be positive");
        nodes_ *= static_cast<std::size_t>(M);
    }
    data_.assign(nodes_ * static_cast<std::size_t>(rows_) * static_cast<std::size_t>(cols_), 0.0);
}

Eigen::MatrixXd MatrixGrid::node_matrix(std::size_t node) const {
    Eigen::MatrixXd m(rows_, cols_);
    for (int r = 0; r < rows_; ++r)
        for (int c = 0; c < cols_; ++c) m(r, c) = at(node, r, c);
    return m;
}

void MatrixGrid::set_node_matrix(std::size_t node, const Eigen::MatrixXd& m) {
    for (int r = 0; r < rows_; ++r)
        for (int c = 0; c < cols_; ++c) at(node, r, c) = m(r, c);
}

std::vector<double> MatrixGrid::node_angles(std::size_t node) const {
    std::vector<double> x(shape_.size());
    std::size_t stride = 1;
    for (int j = static_cast<int>(shape_.size()) - 1; j >= 0; --j) {
        const std::size_t M = static_cast<std::size_t>(shape_[static_cast<std::size_t>(j)]);
        x[static_cast<std::size_t>(j)] =
            static_cast<double>((node / stride) % M) / static_cast<double>(M);
        stride *= M;
    }
    return x;
}

MatrixGrid matmul(const MatrixGrid& a, const MatrixGrid& b) {
    if (a.cols() != b.rows() || a.shape() != b.shape())
        throw std::invalid_argument("matrix grid shape mismatch in matmul");
    MatrixGrid out(a.dims(), a.shape(), a.rows(), b.cols());
    for (std::size_t node = 0; node < a.node_count(); ++node)
        for (int i = 0; i < a.rows(); ++i)
            for (int j = 0; j < b.cols(); ++j) {
                double acc = 0.0;
                for (int k = 0; k < a.cols(); ++k) acc += a.at(node, i, k) * b.at(node, k, j);
                out.at(node, i, j) = acc;
            }
    return out;
}

MatrixGrid transpose(const MatrixGrid& a) {
    MatrixGrid out(a.dims(), a.shape(), a.cols(), a.rows());
    for (std::size_t node = 0; node < a.node_count(); ++node)
        for (int i = 0; i < a.rows(); ++i)
            for (int j = 0; j < a.cols(); ++j) out.at(node, j, i) = a.at(node, i, j);
    return out;
}

MatrixGrid add(const MatrixGrid& a, const MatrixGrid& b) {
    require_same_shape(a, b, "add");
    MatrixGrid out = a;
    for (std::size_t node = 0; node < a.node_count(); ++node)
        for (int i = 0; i < a.rows(); ++i)
            for (int j = 0; j < a.cols(); ++j) out.at(node, i, j) += b.at(node, i, j);
    return out;
}

MatrixGrid subtract(const MatrixGrid& a, const MatrixGrid& b) {
    require_same_shape(a, b, "subtract");
    MatrixGrid out = a;
    for (std::size_t node = 0; node < a.node_count(); ++node)
        for (int i = 0; i < a.rows(); ++i)
            for (int j = 0; j < a.cols(); ++j) out.at(node, i, j) -= b.at(node, i, j);
    return out;
}

MatrixGrid scale(const MatrixGrid& a, double s) {
    MatrixGrid out = a;
    for (std::size_t node = 0; node < a.node_count(); ++node)
        for (int i = 0; i < a.rows(); ++i)
            for (int j = 0; j < a.cols(); ++j) out.at(node, i, j) *= s;
    return out;
}

double condition_number(const Eigen::MatrixXd& m) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    const double smin = svd.singularValues().minCoeff();
    const double smax = svd.singularValues().maxCoeff();
    if (smin == 0.0) return std::numeric_limits<double>::infinity();
    return smax / smin;
}

MatrixGrid nodewise_inverse(const MatrixGrid& a, double* worst_condition,
                            std::size_t* worst_node) {
    if (a.rows() != a.cols()) throw std::invalid_argument("nodewise inverse needs square blocks");
    MatrixGrid out(a.dims(), a.shape(), a.rows(), a.cols());
    double worst = 0.0;
    std::size_t worst_at = 0;
    for (std::size_t node = 0; node < a.node_count(); ++node) {
        const Eigen::MatrixXd m = a.node_matrix(node);
        const double cond = condition_number(m);
        if (cond > worst) {
            worst = cond;
            worst_at = node;
        }
        out.set_node_matrix(node, m.inverse());
    }
    if (worst_condition) *worst_condition = worst;
    if (worst_node) *worst_node = worst_at;
    return out;
}

MatrixSeries series_of(const MatrixGrid& grid, const std::vector<int>& trunc,
                       double* max_truncation_residual) {
    MatrixSeries out(grid.rows(), grid.cols(), grid.dims(), trunc);
    double worst = 0.0;
    GridFunction scratch(grid.dims(), grid.shape());
    for (int r = 0; r < grid.rows(); ++r)
        for (int c = 0; c < grid.cols(); ++c) {
            for (std::size_t node = 0; node < grid.node_count(); ++node)
                scratch[node] = grid.at(node, r, c);
            double resid = 0.0;
            out.at(r, c) = forward_transform(scratch, trunc,
                                             max_truncation_residual ? &resid : nullptr);
            worst = std::max(worst, resid);
        }
    if (max_truncation_residual) *max_truncation_residual = worst;
    return out;
}

MatrixGrid grid_of(const MatrixSeries& series, const std::vector<int>& shape) {
    MatrixGrid out(series.dims(), shape, series.rows, series.cols);
    for (int r = 0; r < series.rows; ++r)
        for (int c = 0; c < series.cols; ++c) {
            const GridFunction g = inverse_transform(series.at(r, c), shape);
            for (std::size_t node = 0; node < g.node_count(); ++node)
                out.at(node, r, c) = g[node];
        }
    return out;
}

MatrixSeries transpose(const MatrixSeries& a) {
    MatrixSeries out(a.cols, a.rows, a.dims(), a.trunc());
    for (int r = 0; r < a.rows; ++r)
        for (int c = 0; c < a.cols; ++c) out.at(c, r) = a.at(r, c);
    return out;
}

MatrixSeries add(const MatrixSeries& a, const MatrixSeries& b) {
    require_same_shape(a, b, "add");
    MatrixSeries out = a;
    for (std::size_t i = 0; i < out.entries.size(); ++i) out.entries[i] += b.entries[i];
    return out;
}

MatrixSeries subtract(const MatrixSeries& a, const MatrixSeries& b) {
    require_same_shape(a, b, "subtract");
    MatrixSeries out = a;
    for (std::size_t i = 0; i < out.entries.size(); ++i) out.entries[i] -= b.entries[i];
    return out;
}

MatrixSeries lie_derivative(const MatrixSeries& a, const Frequencies& freq) {
    MatrixSeries out = a;
    for (auto& e : out.entries) e = lie_derivative(e, freq);
    return out;
}

Eigen::MatrixXd average(const MatrixSeries& a) {
    Eigen::MatrixXd m(a.rows, a.cols);
    for (int r = 0; r < a.rows; ++r)
        for (int c = 0; c < a.cols; ++c) m(r, c) = average(a.at(r, c));
    return m;
}

Eigen::MatrixXd evaluate(const MatrixSeries& a, const std::vector<double>& x) {
    Eigen::MatrixXd m(a.rows, a.cols);
    for (int r = 0; r < a.rows; ++r)
        for (int c = 0; c < a.cols; ++c) m(r, c) = evaluate(a.at(r, c), x);
    return m;
}

double matrix_analytic_norm(const MatrixSeries& a, double rho) {
    double worst = 0.0;
    for (int r = 0; r < a.rows; ++r) {
        double row = 0.0;
        for (int c = 0; c < a.cols; ++c) row += analytic_norm(a.at(r, c), rho);
        worst = std::max(worst, row);
    }
    return worst;
}

double matrix_grid_sup_norm(const MatrixGrid& a) {
    double worst = 0.0;
    for (std::size_t node = 0; node < a.node_count(); ++node)
        for (int r = 0; r < a.rows(); ++r) {
            double row = 0.0;
            for (int c = 0; c < a.cols(); ++c) row += std::abs(a.at(node, r, c));
            worst = std::max(worst, row);
        }
    return worst;
}

double infinity_norm(const Eigen::MatrixXd& m) {
    double worst = 0.0;
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        double row = 0.0;
        for (Eigen::Index c = 0; c < m.cols(); ++c) row += std::abs(m(r, c));
        worst = std::max(worst, row);
    }
    return worst;
}

void write_matrix_series(const std::string& dir, const std::string& basename,
                         const MatrixSeries& a) {
    namespace fs = std::filesystem;
    const fs::path root(dir);
    std::ofstream manifest(root / (basename + ".manifest"));
    if (!manifest) throw ConfigError("cannot open matrix manifest for writing in " + dir);
    manifest << "matrix " << a.rows << " " << a.cols << "\n";
    for (int r = 0; r < a.rows; ++r)
        for (int c = 0; c < a.cols; ++c) {
            std::ostringstream name;
            name << basename << "_" << r << "_" << c << ".coef";
            manifest << "entry " << r << " " << c << " " << name.str() << "\n";
            write_series_file((root / name.str()).string(), a.at(r, c));
        }
}

MatrixSeries read_matrix_series(const std::string& manifest_path) {
    namespace fs = std::filesystem;
    std::ifstream in(manifest_path);
    if (!in) throw ConfigError("cannot open " + manifest_path);
    std::string word;
    int rows = 0, cols = 0;
    if (!(in >> word >> rows >> cols) || word != "matrix")
        throw ConfigError("matrix manifest: expected 'matrix <rows> <cols>' header");
    const fs::path root = fs::path(manifest_path).parent_path();
    MatrixSeries out;
    out.rows = rows;
    out.cols = cols;
    out.entries.resize(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols));
    int r = 0, c = 0;
    std::string name;
    std::size_t seen = 0;
    while (in >> word >> r >> c >> name) {
        if (word != "entry" || r < 0 || r >= rows || c < 0 || c >= cols)
            throw ConfigError("matrix manifest: bad entry line");
        out.at(r, c) = read_series_file((root / name).string());
        ++seen;
    }
    if (seen != out.entries.size())
        throw ConfigError("matrix manifest: missing entries");
    return out;
}

}  // namespace kamtori
