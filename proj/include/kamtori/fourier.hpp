#pragma once

// Real multivariate trigonometric series on the torus T^n x T^ell and their uniform
// grid counterparts.  Angles live in [0,1) and the basis is e^{2*pi*i k.x}; a real
// series satisfies coeff(-k) == conj(coeff(k)) (Hermitian symmetry), which every
// construction path here preserves by design.

#include <complex>
#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace kamtori {

using MultiIndex = std::vector<int>;

// Dimension split of the combined torus: n internal angles (torus coordinates of the
// embedding) and ell external angles (quasi-periodic driving phases).
struct TorusDims {
    int n = 1;
    int ell = 1;
    int d() const { return n + ell; }
    bool operator==(const TorusDims&) const = default;
};
void validate(const TorusDims& dims);

// Width of the complex strip |Im x_j| <= rho on which analytic norms are taken.
struct StripRadius {
    double rho = 0.0;
};
void validate(const StripRadius& rho);

// |k|_1 of a multi-index.
int l1_norm(const MultiIndex& k);

// True if the first nonzero entry of k is positive (k=0 is neither positive nor
// negative).  Used to pick one representative of each Hermitian pair {k, -k}.
bool lex_positive(const MultiIndex& k);

MultiIndex negated(const MultiIndex& k);

// Dense truncated Fourier series: coefficients for every k with |k_j| <= N_j.
class FourierSeries {
  public:
    FourierSeries() = default;
    FourierSeries(TorusDims dims, std::vector<int> trunc);

    static FourierSeries zeros(TorusDims dims, std::vector<int> trunc) {
        return FourierSeries(dims, std::move(trunc));
    }
    static FourierSeries constant(TorusDims dims, std::vector<int> trunc, double value);

    const TorusDims& dims() const { return dims_; }
    const std::vector<int>& trunc() const { return trunc_; }
    int axes() const { return static_cast<int>(trunc_.size()); }
    std::size_t size() const { return coeff_.size(); }

    bool in_box(const MultiIndex& k) const;

    // Coefficient access; reading outside the truncation box yields 0.
    std::complex<double> coeff(const MultiIndex& k) const;

    // Sets coeff(k) = v and coeff(-k) = conj(v) in one move so symmetry cannot be
    // broken.  For k = 0 the imaginary part is dropped (a real series has real mean).
    void set_pair(const MultiIndex& k, std::complex<double> v);

    // Flat storage walk in a fixed (lexicographic over k + N) order; used by every
    // reduction so results do not depend on evaluation order.
    std::size_t flat_size() const { return coeff_.size(); }
    MultiIndex unflatten(std::size_t flat) const;
    std::size_t flatten(const MultiIndex& k) const;
    std::complex<double>& raw(std::size_t flat) { return coeff_[flat]; }
    const std::complex<double>& raw(std::size_t flat) const { return coeff_[flat]; }

    // Largest |coeff(k) - conj(coeff(-k))| over the box; zero for all series built
    // through the public paths, used as a test probe.
    double hermitian_defect() const;

    bool same_layout(const FourierSeries& other) const {
        return dims_ == other.dims_ && trunc_ == other.trunc_;
    }

    FourierSeries& operator+=(const FourierSeries& other);
    FourierSeries& operator-=(const FourierSeries& other);
    FourierSeries& operator*=(double scale);
    friend FourierSeries operator+(FourierSeries a, const FourierSeries& b) { return a += b; }
    friend FourierSeries operator-(FourierSeries a, const FourierSeries& b) { return a -= b; }
    friend FourierSeries operator*(FourierSeries a, double s) { return a *= s; }
    friend FourierSeries operator*(double s, FourierSeries a) { return a *= s; }

  private:
    TorusDims dims_;
    std::vector<int> trunc_;
    std::vector<std::size_t> stride_;
    std::vector<std::complex<double>> coeff_;
};

// Real samples on the uniform grid x_j = i_j / M_j, i_j = 0..M_j-1.
class GridFunction {
  public:
    GridFunction() = default;
    GridFunction(TorusDims dims, std::vector<int> shape);

    const TorusDims& dims() const { return dims_; }
    const std::vector<int>& shape() const { return shape_; }
    std::size_t node_count() const { return values_.size(); }

    double& operator[](std::size_t node) { return values_[node]; }
    double operator[](std::size_t node) const { return values_[node]; }

    // Angle coordinates of a node (each in [0,1)).
    std::vector<double> node_angles(std::size_t node) const;
    std::vector<int> node_indices(std::size_t node) const;
    std::size_t node_at(const std::vector<int>& indices) const;

    const std::vector<double>& values() const { return values_; }
    std::vector<double>& values() { return values_; }

  private:
    TorusDims dims_;
    std::vector<int> shape_;
    std::vector<std::size_t> stride_;
    std::vector<double> values_;
};

// Anti-aliasing contract between a truncation box and a grid shape: M_j >= 2*N_j + 2.
void require_antialiased(const std::vector<int>& trunc, const std::vector<int>& shape);

// Analysis: grid samples -> coefficients on the given truncation box (normalized by
// 1/prod(M_j)); Hermitian symmetry is enforced exactly by pair averaging.  If
// truncation_residual is non-null it receives the unweighted coefficient mass
// sum |c_k| over the representable modes outside the truncation box — the quantity a
// caller watches when products are pushed back into a fixed box.
FourierSeries forward_transform(const GridFunction& grid, const std::vector<int>& trunc,
                                double* truncation_residual = nullptr);

// Synthesis: coefficients -> samples on a grid of the given shape.
GridFunction inverse_transform(const FourierSeries& series, const std::vector<int>& shape);

// Direct summation of the series at one point (the slow, unambiguous evaluator; the
// transforms are checked against it).  Throws SymmetryViolationError if the imaginary
// residual of the collapsed sum exceeds 1e-9; residuals below that are discarded.
double evaluate(const FourierSeries& series, const std::vector<double>& x);

// d/dx_axis in coefficient space: c_k -> 2*pi*i*k_axis * c_k.
FourierSeries derivative(const FourierSeries& series, int axis);

// Mean value = coeff(0).
double average(const FourierSeries& series);

// Weighted coefficient norm sum_k |c_k| e^{2*pi*rho*|k|_1}: an upper surrogate for the
// sup of the analytic extension on the strip of width rho.
double analytic_norm(const FourierSeries& series, double rho);

// Max |value| over grid nodes: the lower bracket for the sup norm.
double grid_sup_norm(const GridFunction& grid);

// Coefficient file format (whitespace-separated, shortest round-trip decimals):
//   dims <n> <ell>
//   trunc <N_1> ... <N_d>
//   <k_1> ... <k_d> <re> <im>       one line per stored representative
// Only the zero index and lexicographically positive indices are written; each
// implies its Hermitian partner.  Absent indices read back as zero.
void write_series(std::ostream& out, const FourierSeries& series);
void write_series_file(const std::string& path, const FourierSeries& series);
FourierSeries read_series(std::istream& in);
FourierSeries read_series_file(const std::string& path);

}  // namespace kamtori
