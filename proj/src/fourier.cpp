#include "kamtori/fourier.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <ostream>
#include <sstream>

#include "kamtori/errors.hpp"

namespace kamtori {

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

// Collapsing a Hermitian-symmetric sum to a real value: imaginary residues above this
// indicate a genuinely broken series, residues below are discarded as round-off.
constexpr double kSymmetryResidualLimit = 1e-9;

std::size_t checked_product(const std::vector<int>& extents) {
    std::size_t p = 1;
    for (int e : extents) p *= static_cast<std::size_t>(e);
    return p;
}

std::string index_to_string(const MultiIndex& k) {
    std::string s = "(";
    for (std::size_t j = 0; j < k.size(); ++j) {
        if (j) s += ",";
        s += std::to_string(k[j]);
    }
    s += ")";
    return s;
}

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

}  // namespace

void validate(const TorusDims& dims) {
    if (dims.n < 1 || dims.ell < 1)
        throw std::invalid_argument("torus dimensions require n >= 1 and ell >= 1, got n=" +
                                    std::to_string(dims.n) + " ell=" + std::to_string(dims.ell));
}

void validate(const StripRadius& rho) {
    if (!(rho.rho > 0.0))
        throw std::invalid_argument("strip radius must be positive, got " +
                                    std::to_string(rho.rho));
}

int l1_norm(const MultiIndex& k) {
    int s = 0;
    for (int kj : k) s += std::abs(kj);
    return s;
}

bool lex_positive(const MultiIndex& k) {
    for (int kj : k) {
        if (kj > 0) return true;
        if (kj < 0) return false;
    }
    return false;
}

MultiIndex negated(const MultiIndex& k) {
    MultiIndex m(k.size());
    for (std::size_t j = 0; j < k.size(); ++j) m[j] = -k[j];
    return m;
}

FourierSeries::FourierSeries(TorusDims dims, std::vector<int> trunc)
    : dims_(dims), trunc_(std::move(trunc)) {
    validate(dims_);
    if (static_cast<int>(trunc_.size()) != dims_.d())
        throw std::invalid_argument("truncation has " + std::to_string(trunc_.size()) +
                                    " axes, torus has " + std::to_string(dims_.d()));
    for (int N : trunc_)
        if (N < 0) throw std::invalid_argument("truncation orders must be nonnegative");
    stride_.assign(trunc_.size(), 1);
    for (int j = static_cast<int>(trunc_.size()) - 2; j >= 0; --j)
        stride_[j] = stride_[j + 1] * static_cast<std::size_t>(2 * trunc_[j + 1] + 1);
    coeff_.assign(stride_[0] * static_cast<std::size_t>(2 * trunc_[0] + 1),
                  std::complex<double>(0.0, 0.0));
}

FourierSeries FourierSeries::constant(TorusDims dims, std::vector<int> trunc, double value) {
    FourierSeries s(dims, std::move(trunc));
    s.set_pair(MultiIndex(s.axes(), 0), value);
    return s;
}

bool FourierSeries::in_box(const MultiIndex& k) const {
    if (k.size() != trunc_.size()) return false;
    for (std::size_t j = 0; j < k.size(); ++j)
        if (std::abs(k[j]) > trunc_[j]) return false;
    return true;
}

std::size_t FourierSeries::flatten(const MultiIndex& k) const {
    std::size_t flat = 0;
    for (std::size_t j = 0; j < k.size(); ++j)
        flat += static_cast<std::size_t>(k[j] + trunc_[j]) * stride_[j];
    return flat;
}

MultiIndex FourierSeries::unflatten(std::size_t flat) const {
    MultiIndex k(trunc_.size());
    for (std::size_t j = 0; j < trunc_.size(); ++j) {
        const std::size_t extent = static_cast<std::size_t>(2 * trunc_[j] + 1);
        k[j] = static_cast<int>((flat / stride_[j]) % extent) - trunc_[j];
    }
    return k;
}

std::complex<double> FourierSeries::coeff(const MultiIndex& k) const {
    if (!in_box(k)) return {0.0, 0.0};
    return coeff_[flatten(k)];
}

void FourierSeries::set_pair(const MultiIndex& k, std::complex<double> v) {
    if (!in_box(k))
        throw std::invalid_argument("index " + index_to_string(k) + " outside truncation box");
    bool zero = std::all_of(k.begin(), k.end(), [](int kj) { return kj == 0; });
    if (zero) {
        coeff_[flatten(k)] = std::complex<double>(v.real(), 0.0);
        return;
    }
    coeff_[flatten(k)] = v;
    coeff_[flatten(negated(k))] = std::conj(v);
}

double FourierSeries::hermitian_defect() const {
    double worst = 0.0;
    for (std::size_t f = 0; f < coeff_.size(); ++f) {
        const MultiIndex k = unflatten(f);
        const std::complex<double> d = coeff_[f] - std::conj(coeff_[flatten(negated(k))]);
        worst = std::max(worst, std::abs(d));
    }
    return worst;
}

FourierSeries& FourierSeries::operator+=(const FourierSeries& other) {
    if (!same_layout(other)) throw std::invalid_argument("series layouts differ in +=");
    for (std::size_t f = 0; f < coeff_.size(); ++f) coeff_[f] += other.coeff_[f];
    return *this;
}

FourierSeries& FourierSeries::operator-=(const FourierSeries& other) {
    if (!same_layout(other)) throw std::invalid_argument("series layouts differ in -=");
    for (std::size_t f = 0; f < coeff_.size(); ++f) coeff_[f] -= other.coeff_[f];
    return *this;
}

FourierSeries& FourierSeries::operator*=(double scale) {
    for (auto& c : coeff_) c *= scale;
    return *this;
}

GridFunction::GridFunction(TorusDims dims, std::vector<int> shape)
    : dims_(dims), shape_(std::move(shape)) {
    validate(dims_);
    if (static_cast<int>(shape_.size()) != dims_.d())
        throw std::invalid_argument("grid shape has " + std::to_string(shape_.size()) +
                                    " axes, torus has " + std::to_string(dims_.d()));
    for (int M : shape_)
        if (M < 1) throw std::invalid_argument("grid extents must be positive");
    stride_.assign(shape_.size(), 1);
    for (int j = static_cast<int>(shape_.size()) - 2; j >= 0; --j)
        stride_[j] = stride_[j + 1] * static_cast<std::size_t>(shape_[j + 1]);
    values_.assign(checked_product(shape_), 0.0);
}

std::vector<int> GridFunction::node_indices(std::size_t node) const {
    std::vector<int> idx(shape_.size());
    for (std::size_t j = 0; j < shape_.size(); ++j)
        idx[j] = static_cast<int>((node / stride_[j]) % static_cast<std::size_t>(shape_[j]));
    return idx;
}

std::vector<double> GridFunction::node_angles(std::size_t node) const {
    std::vector<double> x(shape_.size());
    for (std::size_t j = 0; j < shape_.size(); ++j)
        x[j] = static_cast<double>((node / stride_[j]) % static_cast<std::size_t>(shape_[j])) /
               static_cast<double>(shape_[j]);
    return x;
}

std::size_t GridFunction::node_at(const std::vector<int>& indices) const {
    std::size_t node = 0;
    for (std::size_t j = 0; j < indices.size(); ++j)
        node += static_cast<std::size_t>(indices[j]) * stride_[j];
    return node;
}

void require_antialiased(const std::vector<int>& trunc, const std::vector<int>& shape) {
    if (trunc.size() != shape.size())
        throw std::invalid_argument("truncation and grid shape have different axis counts");
    for (std::size_t j = 0; j < trunc.size(); ++j) {
        if (shape[j] < 2 * trunc[j] + 2)
            throw std::invalid_argument(
                "grid axis " + std::to_string(j) + " has " + std::to_string(shape[j]) +
                " nodes; truncation order " + std::to_string(trunc[j]) + " needs at least " +
                std::to_string(2 * trunc[j] + 2));
    }
}

namespace {

// One-axis discrete Fourier transform of every line of a multidimensional complex
// buffer.  sign = -1 is analysis, +1 synthesis.  Plain O(M^2) per line: grids here are
// desk scale and the fixed summation order keeps results bit-reproducible.
void transform_axis(std::vector<std::complex<double>>& buf, const std::vector<int>& shape,
                    const std::vector<std::size_t>& stride, int axis, int sign) {
    const int M = shape[axis];
    std::vector<std::complex<double>> twiddle(M);
    for (int m = 0; m < M; ++m) {
        const double ang = sign * two_pi * static_cast<double>(m) / static_cast<double>(M);
        twiddle[m] = {std::cos(ang), std::sin(ang)};
    }
    const std::size_t st = stride[axis];
    const std::size_t block = st * static_cast<std::size_t>(M);
    const std::size_t total = buf.size();
    std::vector<std::complex<double>> line(M), out(M);
    for (std::size_t base = 0; base < total; base += block) {
        for (std::size_t inner = 0; inner < st; ++inner) {
            const std::size_t start = base + inner;
            for (int j = 0; j < M; ++j) line[j] = buf[start + st * static_cast<std::size_t>(j)];
            for (int k = 0; k < M; ++k) {
                std::complex<double> acc(0.0, 0.0);
                for (int j = 0; j < M; ++j)
                    acc += line[j] * twiddle[static_cast<std::size_t>(j) * k % M];
                out[k] = acc;
            }
            for (int k = 0; k < M; ++k) buf[start + st * static_cast<std::size_t>(k)] = out[k];
        }
    }
}

std::vector<std::size_t> row_major_strides(const std::vector<int>& shape) {
    std::vector<std::size_t> stride(shape.size(), 1);
    for (int j = static_cast<int>(shape.size()) - 2; j >= 0; --j)
        stride[j] = stride[j + 1] * static_cast<std::size_t>(shape[j + 1]);
    return stride;
}

std::size_t bin_of_mode(const MultiIndex& k, const std::vector<int>& shape,
                        const std::vector<std::size_t>& stride) {
    std::size_t flat = 0;
    for (std::size_t j = 0; j < k.size(); ++j) {
        int b = k[j] % shape[j];
        if (b < 0) b += shape[j];
        flat += static_cast<std::size_t>(b) * stride[j];
    }
    return flat;
}

}  // namespace

FourierSeries forward_transform(const GridFunction& grid, const std::vector<int>& trunc,
                                double* truncation_residual) {
    require_antialiased(trunc, grid.shape());
    const std::vector<int>& shape = grid.shape();
    const auto stride = row_major_strides(shape);

    std::vector<std::complex<double>> buf(grid.node_count());
    for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = {grid[i], 0.0};
    for (int a = 0; a < static_cast<int>(shape.size()); ++a)
        transform_axis(buf, shape, stride, a, -1);
    const double norm = 1.0 / static_cast<double>(grid.node_count());
    for (auto& c : buf) c *= norm;

    FourierSeries series(grid.dims(), trunc);
    // Average each bin with the conjugate of its mirror: real input already gives
    // conjugate pairs up to round-off, the averaging makes the symmetry exact.
    for (std::size_t f = 0; f < series.flat_size(); ++f) {
        const MultiIndex k = series.unflatten(f);
        if (!lex_positive(k) && std::any_of(k.begin(), k.end(), [](int kj) { return kj != 0; }))
            continue;
        const std::complex<double> cp = buf[bin_of_mode(k, shape, stride)];
        const std::complex<double> cm = buf[bin_of_mode(negated(k), shape, stride)];
        series.set_pair(k, 0.5 * (cp + std::conj(cm)));
    }

    if (truncation_residual) {
        double resid = 0.0;
        const std::size_t bins = buf.size();
        std::vector<int> idx(shape.size());
        for (std::size_t flat = 0; flat < bins; ++flat) {
            bool outside = false;
            for (std::size_t j = 0; j < shape.size(); ++j) {
                int b = static_cast<int>((flat / stride[j]) % static_cast<std::size_t>(shape[j]));
                int mode = (2 * b <= shape[j]) ? b : b - shape[j];
                if (std::abs(mode) > trunc[j]) {
                    outside = true;
                    break;
                }
            }
            if (outside) resid += std::abs(buf[flat]);
        }
        *truncation_residual = resid;
    }
    return series;
}

GridFunction inverse_transform(const FourierSeries& series, const std::vector<int>& shape) {
    require_antialiased(series.trunc(), shape);
    const auto stride = row_major_strides(shape);
    std::vector<std::complex<double>> buf(checked_product(shape), {0.0, 0.0});
    for (std::size_t f = 0; f < series.flat_size(); ++f) {
        const MultiIndex k = series.unflatten(f);
        buf[bin_of_mode(k, shape, stride)] = series.raw(f);
    }
    for (int a = 0; a < static_cast<int>(shape.size()); ++a)
        transform_axis(buf, shape, stride, a, +1);
    GridFunction grid(series.dims(), shape);
    for (std::size_t i = 0; i < buf.size(); ++i) grid[i] = buf[i].real();
    return grid;
}

double evaluate(const FourierSeries& series, const std::vector<double>& x) {
    if (static_cast<int>(x.size()) != series.axes())
        throw std::invalid_argument("evaluation point has wrong number of angles");
    const std::vector<int>& N = series.trunc();
    // Per-axis phase tables e^{2*pi*i*k_j*x_j}, k_j = -N_j..N_j.
    std::vector<std::vector<std::complex<double>>> phase(N.size());
    for (std::size_t j = 0; j < N.size(); ++j) {
        phase[j].resize(2 * N[j] + 1);
        for (int k = -N[j]; k <= N[j]; ++k) {
            const double ang = two_pi * k * x[j];
            phase[j][static_cast<std::size_t>(k + N[j])] = {std::cos(ang), std::sin(ang)};
        }
    }
    std::complex<double> acc(0.0, 0.0);
    for (std::size_t f = 0; f < series.flat_size(); ++f) {
        const MultiIndex k = series.unflatten(f);
        std::complex<double> basis(1.0, 0.0);
        for (std::size_t j = 0; j < k.size(); ++j)
            basis *= phase[j][static_cast<std::size_t>(k[j] + N[j])];
        acc += series.raw(f) * basis;
    }
    if (std::abs(acc.imag()) > kSymmetryResidualLimit)
        throw SymmetryViolationError("series evaluation has imaginary residual " +
                                     format_double(acc.imag()) +
                                     "; coefficients are not Hermitian-symmetric");
    return acc.real();
}

FourierSeries derivative(const FourierSeries& series, int axis) {
    if (axis < 0 || axis >= series.axes())
        throw std::invalid_argument("derivative axis out of range");
    FourierSeries out = series;
    for (std::size_t f = 0; f < out.flat_size(); ++f) {
        const MultiIndex k = out.unflatten(f);
        out.raw(f) *= std::complex<double>(0.0, two_pi * k[static_cast<std::size_t>(axis)]);
    }
    return out;
}

double average(const FourierSeries& series) {
    return series.coeff(MultiIndex(series.axes(), 0)).real();
}

double analytic_norm(const FourierSeries& series, double rho) {
    if (rho < 0.0) throw std::invalid_argument("analytic norm needs rho >= 0");
    double total = 0.0;
    for (std::size_t f = 0; f < series.flat_size(); ++f) {
        const MultiIndex k = series.unflatten(f);
        total += std::abs(series.raw(f)) * std::exp(two_pi * rho * l1_norm(k));
    }
    return total;
}

double grid_sup_norm(const GridFunction& grid) {
    double m = 0.0;
    for (std::size_t i = 0; i < grid.node_count(); ++i) m = std::max(m, std::abs(grid[i]));
    return m;
}

void write_series(std::ostream& out, const FourierSeries& series) {
    out << "dims " << series.dims().n << " " << series.dims().ell << "\n";
    out << "trunc";
    for (int N : series.trunc()) out << " " << N;
    out << "\n";
    for (std::size_t f = 0; f < series.flat_size(); ++f) {
        const MultiIndex k = series.unflatten(f);
        const bool zero = std::all_of(k.begin(), k.end(), [](int kj) { return kj == 0; });
        if (!zero && !lex_positive(k)) continue;
        for (int kj : k) out << kj << " ";
        out << format_double(series.raw(f).real()) << " " << format_double(series.raw(f).imag())
            << "\n";
    }
}

void write_series_file(const std::string& path, const FourierSeries& series) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open " + path + " for writing");
    write_series(out, series);
    if (!out) throw ConfigError("write to " + path + " failed");
}

namespace {

double parse_double_token(const std::string& tok, const std::string& context) {
    double v = 0.0;
    auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
        throw ConfigError("coefficient file: bad number '" + tok + "' in " + context);
    return v;
}

int parse_int_token(const std::string& tok, const std::string& context) {
    int v = 0;
    auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
        throw ConfigError("coefficient file: bad integer '" + tok + "' in " + context);
    return v;
}

}  // namespace

FourierSeries read_series(std::istream& in) {
    std::string word;
    if (!(in >> word) || word != "dims")
        throw ConfigError("coefficient file: expected 'dims' header");
    TorusDims dims;
    if (!(in >> dims.n >> dims.ell)) throw ConfigError("coefficient file: bad 'dims' line");
    if (!(in >> word) || word != "trunc")
        throw ConfigError("coefficient file: expected 'trunc' header");
    std::vector<int> trunc(static_cast<std::size_t>(dims.n + dims.ell));
    for (auto& N : trunc)
        if (!(in >> N)) throw ConfigError("coefficient file: bad 'trunc' line");
    FourierSeries series(dims, trunc);

    const int d = dims.n + dims.ell;
    std::vector<std::string> toks(static_cast<std::size_t>(d) + 2);
    while (in >> toks[0]) {
        for (std::size_t t = 1; t < toks.size(); ++t)
            if (!(in >> toks[t]))
                throw ConfigError("coefficient file: truncated coefficient line");
        MultiIndex k(static_cast<std::size_t>(d));
        for (int j = 0; j < d; ++j)
            k[static_cast<std::size_t>(j)] =
                parse_int_token(toks[static_cast<std::size_t>(j)], "coefficient index");
        const double re = parse_double_token(toks[static_cast<std::size_t>(d)], "coefficient");
        const double im = parse_double_token(toks[static_cast<std::size_t>(d) + 1], "coefficient");
        if (!series.in_box(k))
            throw ConfigError("coefficient file: index " + index_to_string(k) +
                              " outside declared truncation");
        if (lex_positive(k) || !std::any_of(k.begin(), k.end(), [](int kj) { return kj != 0; }))
            series.set_pair(k, {re, im});
        else
            series.set_pair(negated(k), {re, -im});
    }
    return series;
}

FourierSeries read_series_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path);
    return read_series(in);
}

}  // namespace kamtori
