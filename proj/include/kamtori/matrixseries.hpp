#pragma once

// Matrix-valued functions on the torus in two interchangeable representations:
// MatrixSeries (a matrix of Fourier series) and MatrixGrid (a matrix per grid node).
// Nonlinear work happens nodewise on an oversampled grid; results are transformed and
// re-truncated once, with the discarded spectral mass available as a diagnostic.

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "kamtori/fourier.hpp"

namespace kamtori {

struct MatrixSeries {
    int rows = 0;
    int cols = 0;
    std::vector<FourierSeries> entries;  // row-major

    MatrixSeries() = default;
    MatrixSeries(int r, int c, TorusDims dims, std::vector<int> trunc);

    FourierSeries& at(int r, int c) { return entries[static_cast<std::size_t>(r * cols + c)]; }
    const FourierSeries& at(int r, int c) const {
        return entries[static_cast<std::size_t>(r * cols + c)];
    }
    const TorusDims& dims() const { return entries.front().dims(); }
    const std::vector<int>& trunc() const { return entries.front().trunc(); }
};

class MatrixGrid {
  public:
    MatrixGrid() = default;
    MatrixGrid(TorusDims dims, std::vector<int> shape, int rows, int cols);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    std::size_t node_count() const { return nodes_; }
    const TorusDims& dims() const { return dims_; }
    const std::vector<int>& shape() const { return shape_; }

    double& at(std::size_t node, int r, int c) {
        return data_[(node * rows_ + static_cast<std::size_t>(r)) * cols_ +
                     static_cast<std::size_t>(c)];
    }
    double at(std::size_t node, int r, int c) const {
        return data_[(node * rows_ + static_cast<std::size_t>(r)) * cols_ +
                     static_cast<std::size_t>(c)];
    }

    Eigen::MatrixXd node_matrix(std::size_t node) const;
    void set_node_matrix(std::size_t node, const Eigen::MatrixXd& m);

    // Angle coordinates of a node, as for GridFunction.
    std::vector<double> node_angles(std::size_t node) const;

  private:
    TorusDims dims_;
    std::vector<int> shape_;
    int rows_ = 0, cols_ = 0;
    std::size_t nodes_ = 0;
    std::vector<double> data_;
};

// Nodewise algebra (fixed loop orders throughout).
MatrixGrid matmul(const MatrixGrid& a, const MatrixGrid& b);
MatrixGrid transpose(const MatrixGrid& a);
MatrixGrid add(const MatrixGrid& a, const MatrixGrid& b);
MatrixGrid subtract(const MatrixGrid& a, const MatrixGrid& b);
MatrixGrid scale(const MatrixGrid& a, double s);

// Nodewise inverse; *worst_condition (if non-null) receives the largest 2-norm
// condition number encountered and *worst_node the node attaining it.
MatrixGrid nodewise_inverse(const MatrixGrid& a, double* worst_condition = nullptr,
                            std::size_t* worst_node = nullptr);

// Representation changes.  series_of reports (if requested) the largest per-entry
// truncation residual of the analysis step.
MatrixSeries series_of(const MatrixGrid& grid, const std::vector<int>& trunc,
                       double* max_truncation_residual = nullptr);
MatrixGrid grid_of(const MatrixSeries& series, const std::vector<int>& shape);

MatrixSeries transpose(const MatrixSeries& a);
MatrixSeries add(const MatrixSeries& a, const MatrixSeries& b);
MatrixSeries subtract(const MatrixSeries& a, const MatrixSeries& b);
MatrixSeries lie_derivative(const MatrixSeries& a, const struct Frequencies& freq);

// Mean matrix (entrywise zero coefficients).
Eigen::MatrixXd average(const MatrixSeries& a);

// Entry evaluation at a point.
Eigen::MatrixXd evaluate(const MatrixSeries& a, const std::vector<double>& x);

// Norm conventions: a matrix norm is the max row sum of its entries' norms, matching
// the induced infinity norm used by the certificate.
double matrix_analytic_norm(const MatrixSeries& a, double rho);
double matrix_grid_sup_norm(const MatrixGrid& a);
double infinity_norm(const Eigen::MatrixXd& m);  // max abs row sum

// 2-norm condition number of a constant matrix.
double condition_number(const Eigen::MatrixXd& m);

// Serialization: one coefficient file per entry plus an index manifest.
void write_matrix_series(const std::string& dir, const std::string& basename,
                         const MatrixSeries& a);
MatrixSeries read_matrix_series(const std::string& manifest_path);

}  // namespace kamtori
