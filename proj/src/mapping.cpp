#include "caplab/mapping.hpp"

#include "caplab/small_matrix.hpp"

#include <fstream>
#include <sstream>

namespace caplab {

namespace {

Real radial_norm(const Vector& x) { return x.norm(); }

void check_part_dim(int a, int b) {
  if (a != 0 && b != 0 && a != b)
    throw ValidationError("composed: component dimensions disagree");
}

}  // namespace

std::int64_t GridFieldData::node_count() const {
  std::int64_t n = 1;
  for (int i = 0; i < dim; ++i) n *= nodes;
  return n;
}

Vector GridFieldData::node_value(std::span<const int> idx) const {
  std::int64_t flat = 0;
  for (int i = 0; i < dim; ++i) flat = flat * nodes + idx[i];
  Vector v(dim);
  for (int c = 0; c < dim; ++c) v[c] = values[flat * dim + c];
  return v;
}

namespace {

void validate_field(const GridFieldData& f) {
  if (f.dim < 2 || f.dim > 3)
    throw ValidationError("grid_field: dimension must be 2 or 3");
  if (f.nodes < 2) throw ValidationError("grid_field: needs >= 2 nodes per axis");
  if (f.order != 1)
    throw ValidationError("grid_field: only multilinear interpolation (order 1)");
  if (f.lo.size() != f.dim || f.hi.size() != f.dim)
    throw ValidationError("grid_field: corner dimension mismatch");
  for (int i = 0; i < f.dim; ++i)
    if (!(f.lo[i] < f.hi[i]))
      throw ValidationError("grid_field: corners must satisfy lo < hi");
  if (std::ssize(f.values) != f.node_count() * f.dim)
    throw ValidationError("grid_field: sample count does not match header");
  for (Real v : f.values)
    if (!std::isfinite(v))
      throw ValidationError("grid_field: non-finite sample value");
}

}  // namespace

GridFieldData load_grid_field_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("grid_field: cannot open " + path);
  std::string line;
  if (!std::getline(in, line))
    throw ValidationError("grid_field: missing header in " + path);
  std::stringstream header(line);
  GridFieldData f;
  char sep = 0;
  if (!(header >> f.dim >> sep >> f.nodes))
    throw ValidationError("grid_field: bad header in " + path);
  if (f.dim < 1 || f.dim > 3)
    throw ValidationError("grid_field: bad dimension in header of " + path);
  f.lo.resize(f.dim);
  f.hi.resize(f.dim);
  for (int i = 0; i < f.dim; ++i)
    if (!(header >> sep >> f.lo[i]))
      throw ValidationError("grid_field: bad header (lo) in " + path);
  for (int i = 0; i < f.dim; ++i)
    if (!(header >> sep >> f.hi[i]))
      throw ValidationError("grid_field: bad header (hi) in " + path);
  f.values.reserve(16);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream row(line);
    Real v;
    while (row >> v) {
      f.values.push_back(v);
      row >> sep;
    }
  }
  f.source_path = path;
  validate_field(f);
  return f;
}

GridFieldData load_grid_field_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("grid_field: cannot open " + path);
  std::int32_t dim = 0, nodes = 0;
  in.read(reinterpret_cast<char*>(&dim), sizeof dim);
  in.read(reinterpret_cast<char*>(&nodes), sizeof nodes);
  if (!in || dim < 1 || dim > 3)
    throw ValidationError("grid_field: bad binary header in " + path);
  GridFieldData f;
  f.dim = dim;
  f.nodes = nodes;
  f.lo.resize(dim);
  f.hi.resize(dim);
  in.read(reinterpret_cast<char*>(f.lo.data()), dim * sizeof(Real));
  in.read(reinterpret_cast<char*>(f.hi.data()), dim * sizeof(Real));
  if (nodes < 2 || nodes > 4096)
    throw ValidationError("grid_field: bad node count in " + path);
  f.values.resize(static_cast<std::size_t>(f.node_count()) * dim);
  in.read(reinterpret_cast<char*>(f.values.data()),
          static_cast<std::streamsize>(f.values.size() * sizeof(Real)));
  if (!in) throw ValidationError("grid_field: truncated binary file " + path);
  f.source_path = path;
  validate_field(f);
  return f;
}

void save_grid_field_csv(const GridFieldData& field, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("grid_field: cannot write " + path);
  out.precision(17);
  out << field.dim << "," << field.nodes;
  for (int i = 0; i < field.dim; ++i) out << "," << field.lo[i];
  for (int i = 0; i < field.dim; ++i) out << "," << field.hi[i];
  out << "\n";
  const std::int64_t count = field.node_count();
  for (std::int64_t k = 0; k < count; ++k) {
    for (int c = 0; c < field.dim; ++c) {
      if (c) out << ",";
      out << field.values[k * field.dim + c];
    }
    out << "\n";
  }
}

MappingSpec MappingSpec::identity() { return {}; }

MappingSpec MappingSpec::linear(const Matrix& a) {
  if (a.rows() != a.cols()) throw ValidationError("linear: matrix must be square");
  if (a.rows() < 2) throw ValidationError("linear: dimension must be >= 2");
  if (!a.allFinite()) throw ValidationError("linear: non-finite matrix entry");
  if (a.determinant() == 0.0)
    throw ValidationError("linear: matrix must be nonsingular");
  MappingSpec s;
  s.family = Family::linear;
  s.matrix = a;
  return s;
}

MappingSpec MappingSpec::radial_power(Real a) {
  if (!(a > 0.0) || !std::isfinite(a))
    throw ValidationError("radial_power: exponent must be positive and finite");
  MappingSpec s;
  s.family = Family::radial_power;
  s.exponent = a;
  return s;
}

MappingSpec MappingSpec::planar_stretch(Real k) {
  if (!(k > 0.0) || !std::isfinite(k))
    throw ValidationError("planar_stretch: factor must be positive and finite");
  MappingSpec s;
  s.family = Family::planar_stretch;
  s.stretch = k;
  return s;
}

MappingSpec MappingSpec::grid_field(std::shared_ptr<const GridFieldData> data) {
  if (!data) throw ValidationError("grid_field: missing samples");
  validate_field(*data);
  MappingSpec s;
  s.family = Family::grid_field;
  s.field = std::move(data);
  return s;
}

MappingSpec MappingSpec::composed(MappingSpec inner, MappingSpec outer) {
  if (inner.family == Family::composed || outer.family == Family::composed)
    throw ValidationError("composed: nesting depth is limited to 2");
  check_part_dim(inner.fixed_dim(), outer.fixed_dim());
  MappingSpec s;
  s.family = Family::composed;
  s.parts.push_back(std::move(inner));
  s.parts.push_back(std::move(outer));
  return s;
}

bool MappingSpec::analytic() const {
  switch (family) {
    case Family::grid_field:
      return false;
    case Family::composed:
      return parts[0].analytic() && parts[1].analytic();
    default:
      return true;
  }
}

int MappingSpec::fixed_dim() const {
  switch (family) {
    case Family::linear:
      return static_cast<int>(matrix.rows());
    case Family::planar_stretch:
      return 2;
    case Family::grid_field:
      return field->dim;
    case Family::composed: {
      const int a = parts[0].fixed_dim(), b = parts[1].fixed_dim();
      return a != 0 ? a : b;
    }
    default:
      return 0;
  }
}

std::string MappingSpec::describe() const {
  switch (family) {
    case Family::identity:
      return "identity";
    case Family::linear:
      return "linear(" + std::to_string(matrix.rows()) + "x" +
             std::to_string(matrix.cols()) + ")";
    case Family::radial_power:
      return "radial_power(a=" + std::to_string(exponent) + ")";
    case Family::planar_stretch:
      return "planar_stretch(k=" + std::to_string(stretch) + ")";
    case Family::grid_field:
      return "grid_field(" + field->source_path + ")";
    case Family::composed:
      return "composed(" + parts[0].describe() + ", " + parts[1].describe() +
             ")";
  }
  return "unknown";
}

Real default_fd_step(const Vector& x) {
  return std::max(1e-5, 1e-6 * (1.0 + x.norm()));
}

namespace {

Vector interpolate_field(const GridFieldData& f, const Vector& x) {
  const int n = f.dim;
  if (x.size() != n) throw ValidationError("grid_field: point dimension mismatch");
  std::vector<int> base(n);
  std::vector<Real> frac(n);
  for (int i = 0; i < n; ++i) {
    const Real step = (f.hi[i] - f.lo[i]) / (f.nodes - 1);
    Real t = (x[i] - f.lo[i]) / step;
    t = std::clamp(t, 0.0, static_cast<Real>(f.nodes - 1));
    int b = std::min(static_cast<int>(t), f.nodes - 2);
    base[i] = b;
    frac[i] = t - b;
  }
  Vector out = Vector::Zero(n);
  std::vector<int> idx(n);
  for (int corner = 0; corner < (1 << n); ++corner) {
    Real w = 1.0;
    for (int i = 0; i < n; ++i) {
      const int bit = (corner >> i) & 1;
      idx[i] = base[i] + bit;
      w *= bit ? frac[i] : 1.0 - frac[i];
    }
    if (w != 0.0) out += w * f.node_value(idx);
  }
  return out;
}

}  // namespace

Vector evaluate(const MappingSpec& spec, const Vector& x) {
  if (!x.allFinite()) throw ValidationError("evaluate: non-finite point");
  const int fd = spec.fixed_dim();
  if (fd != 0 && x.size() != fd)
    throw ValidationError("evaluate: point dimension mismatch");
  switch (spec.family) {
    case Family::identity:
      return x;
    case Family::linear:
      return spec.matrix * x;
    case Family::radial_power: {
      const Real r = radial_norm(x);
      if (r == 0.0) return Vector::Zero(x.size());
      return std::pow(r, spec.exponent - 1.0) * x;
    }
    case Family::planar_stretch: {
      Vector y = x;
      y[0] *= spec.stretch;
      return y;
    }
    case Family::grid_field:
      return interpolate_field(*spec.field, x);
    case Family::composed:
      return evaluate(spec.parts[1], evaluate(spec.parts[0], x));
  }
  throw ValidationError("evaluate: unknown family");
}

Vector evaluate(const MappingSpec& spec, const Domain& domain, const Vector& x) {
  if (!domain.inside(x))
    throw DomainError("evaluate: point lies outside the domain");
  return evaluate(spec, x);
}

namespace {

Matrix analytic_jacobian(const MappingSpec& spec, const Vector& x) {
  const auto n = x.size();
  switch (spec.family) {
    case Family::identity:
      return Matrix::Identity(n, n);
    case Family::linear:
      return spec.matrix;
    case Family::radial_power: {
      const Real a = spec.exponent;
      const Real r = radial_norm(x);
      if (r == 0.0) {
        if (a > 1.0) return Matrix::Zero(n, n);
        if (a == 1.0) return Matrix::Identity(n, n);
        return Matrix::Constant(n, n, kInf);  // unbounded stretch at the origin
      }
      const Vector u = x / r;
      return std::pow(r, a - 1.0) *
             (Matrix::Identity(n, n) + (a - 1.0) * u * u.transpose());
    }
    case Family::planar_stretch: {
      Matrix j = Matrix::Identity(2, 2);
      j(0, 0) = spec.stretch;
      return j;
    }
    case Family::composed: {
      const Vector mid = evaluate(spec.parts[0], x);
      return analytic_jacobian(spec.parts[1], mid) *
             analytic_jacobian(spec.parts[0], x);
    }
    default:
      throw UnsupportedSchemeError(
          "jacobian: analytic differentiation unavailable for " +
          spec.describe());
  }
}

// Second-order one-sided difference; falls back to first order when the
// domain is too thin for the wide stencil.
Vector one_sided_column(const MappingSpec& spec, const Domain* domain,
                        const Vector& x, int axis, Real h, int dir) {
  Vector x1 = x, x2 = x;
  x1[axis] += dir * h;
  x2[axis] += dir * 2.0 * h;
  const bool wide = domain == nullptr || domain->inside(x2);
  const Vector f0 = evaluate(spec, x);
  const Vector f1 = evaluate(spec, x1);
  if (wide) {
    const Vector f2 = evaluate(spec, x2);
    return dir * (-3.0 * f0 + 4.0 * f1 - f2) / (2.0 * h);
  }
  return dir * (f1 - f0) / h;
}

Matrix fd_jacobian(const MappingSpec& spec, const Domain* domain,
                   const Vector& x, Real h) {
  if (h <= 0.0) h = default_fd_step(x);
  const auto n = x.size();
  Matrix j(n, n);
  for (int i = 0; i < n; ++i) {
    Vector xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    const bool plus_ok = domain == nullptr || domain->inside(xp);
    const bool minus_ok = domain == nullptr || domain->inside(xm);
    if (plus_ok && minus_ok) {
      j.col(i) = (evaluate(spec, xp) - evaluate(spec, xm)) / (2.0 * h);
    } else if (plus_ok) {
      j.col(i) = one_sided_column(spec, domain, x, i, h, +1);
    } else if (minus_ok) {
      j.col(i) = one_sided_column(spec, domain, x, i, h, -1);
    } else {
      j.col(i) = (evaluate(spec, xp) - evaluate(spec, xm)) / (2.0 * h);
    }
  }
  return j;
}

// grid_field has no analytic extension past its lattice; difference stencils
// must stay inside the lattice box.
Domain field_box(const GridFieldData& f) {
  return Domain::box(f.lo, f.hi, 2);
}

}  // namespace

Matrix jacobian(const MappingSpec& spec, const Vector& x, const Scheme& scheme) {
  if (scheme.kind == Scheme::Kind::analytic) return analytic_jacobian(spec, x);
  if (spec.family == Family::grid_field) {
    const Domain box = field_box(*spec.field);
    return fd_jacobian(spec, &box, x, scheme.step);
  }
  return fd_jacobian(spec, nullptr, x, scheme.step);
}

Matrix jacobian(const MappingSpec& spec, const Domain& domain, const Vector& x,
                const Scheme& scheme) {
  if (scheme.kind == Scheme::Kind::analytic) return analytic_jacobian(spec, x);
  return fd_jacobian(spec, &domain, x, scheme.step);
}

MappingSpec inverse_spec(const MappingSpec& spec) {
  switch (spec.family) {
    case Family::identity:
      return MappingSpec::identity();
    case Family::linear:
      return MappingSpec::linear(spec.matrix.inverse());
    case Family::radial_power:
      return MappingSpec::radial_power(1.0 / spec.exponent);
    case Family::planar_stretch:
      return MappingSpec::planar_stretch(1.0 / spec.stretch);
    case Family::grid_field:
      throw NoInverseError("inverse_spec: grid_field has no closed-form inverse");
    case Family::composed:
      return MappingSpec::composed(inverse_spec(spec.parts[1]),
                                   inverse_spec(spec.parts[0]));
  }
  throw ValidationError("inverse_spec: unknown family");
}

std::vector<Vector> singular_points(const MappingSpec& spec) {
  switch (spec.family) {
    case Family::radial_power:
      if (spec.exponent < 1.0) {
        // dimension resolved at sampling time; origin in any dimension
        return {Vector()};
      }
      return {};
    case Family::composed: {
      std::vector<Vector> pts = singular_points(spec.parts[0]);
      for (const Vector& p : singular_points(spec.parts[1])) {
        try {
          const MappingSpec inv = inverse_spec(spec.parts[0]);
          if (p.size() == 0) {
            pts.push_back(p);  // origin marker maps through origin-fixing parts
          } else {
            pts.push_back(evaluate(inv, p));
          }
        } catch (const NoInverseError&) {
          pts.push_back(p);
        }
      }
      return pts;
    }
    default:
      return {};
  }
}

DifferentialSample make_differential_sample(const Vector& x, const Matrix& j) {
  const auto n = j.rows();
  if (n != j.cols() || (n != 2 && n != 3))
    throw ValidationError("differential_sample: only n in {2,3} supported");
  DifferentialSample s;
  s.x = x;
  s.jacobian = j;
  if (!j.allFinite()) {
    s.det = kNaN;
    s.op_norm = kInf;
    s.min_stretch = kNaN;
    s.adj_norm = kNaN;
    return s;
  }
  s.det = j.determinant();
  const Vector sigma = singular_values(j);
  s.op_norm = sigma[0];
  s.min_stretch = sigma[n - 1];
  s.adj_norm = singular_values(adjugate(j))[0];
  return s;
}

DifferentialSample differential_sample(const MappingSpec& spec, const Vector& x,
                                       const Scheme& scheme) {
  return make_differential_sample(x, jacobian(spec, x, scheme));
}

GridSamples sample_grid(const MappingSpec& spec, const Domain& domain,
                        const Scheme& scheme, Real eps_sing) {
  if (domain.dim != 2 && domain.dim != 3)
    throw ValidationError("sample_grid: only n in {2,3} supported");
  if (domain.grid_n < 4)
    throw ValidationError("sample_grid: grid must be >= 4 points per axis");
  const int fd = spec.fixed_dim();
  if (fd != 0 && fd != domain.dim)
    throw ValidationError("sample_grid: mapping and domain dimensions differ");
  if (scheme.kind == Scheme::Kind::analytic && !spec.analytic())
    throw UnsupportedSchemeError("sample_grid: mapping requires central_fd");

  GridSamples out;
  out.domain = domain;
  out.exclusion_radius =
      eps_sing < 0.0 ? 2.0 * domain.max_cell_width() : eps_sing;

  std::vector<Vector> sing;
  for (const Vector& p : singular_points(spec))
    sing.push_back(p.size() == 0 ? Vector(Vector::Zero(domain.dim)) : p);

  const Real vol = domain.cell_volume();
  for (std::int64_t c = 0; c < domain.cell_count(); ++c) {
    const Vector x = domain.cell_center(c);
    if (!domain.inside(x)) continue;
    bool excl = false;
    for (const Vector& p : sing) {
      if ((x - p).norm() < out.exclusion_radius) {
        excl = true;
        break;
      }
    }
    out.cells.push_back(c);
    out.samples.push_back(make_differential_sample(
        x, scheme.kind == Scheme::Kind::analytic
               ? analytic_jacobian(spec, x)
               : jacobian(spec, domain, x, scheme)));
    out.weights.push_back(vol);
    out.excluded.push_back(excl ? 1 : 0);
    if (excl) ++out.excluded_count;
  }
  if (out.samples.empty())
    throw ValidationError("sample_grid: no cell centers inside the domain");
  return out;
}

}  // namespace caplab
