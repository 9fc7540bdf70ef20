#include "park/solver.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cassert>
#include <cmath>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace park {

const char* to_string(SolveStatus s)
{
    switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::Unbounded: return "unbounded";
    case SolveStatus::IterationLimit: return "iteration-limit";
    }
    return "?";
}

VarId ConicProgram::add_variable(std::string name, double lb, double ub)
{
    if (lb > ub)
        throw std::invalid_argument("variable '" + name + "': lb > ub");
    names_.push_back(std::move(name));
    lb_.push_back(lb);
    ub_.push_back(ub);
    obj_lin_.push_back(0.0);
    obj_quad_.push_back(0.0);
    return static_cast<VarId>(names_.size()) - 1;
}

void ConicProgram::set_bounds(VarId v, double lb, double ub)
{
    if (lb > ub)
        throw std::invalid_argument("variable '" + names_[v] + "': lb > ub");
    lb_[v] = lb;
    ub_[v] = ub;
}

void ConicProgram::add_objective(VarId v, double coeff) { obj_lin_[v] += coeff; }

void ConicProgram::add_quadratic_objective(VarId v, double weight)
{
    if (weight < 0.0)
        throw std::invalid_argument("quadratic weight must be >= 0");
    obj_quad_[v] += weight;
}

int ConicProgram::add_row(std::vector<LinTerm> terms, Rel rel, double rhs,
                          std::string tag)
{
    for (const auto& t : terms)
        if (t.var < 0 || t.var >= num_variables())
            throw std::invalid_argument("row references unregistered variable");
    rows_.push_back({std::move(terms), rel, rhs, std::move(tag)});
    return static_cast<int>(rows_.size()) - 1;
}

int ConicProgram::add_soc(AffineExpr radius, std::vector<AffineExpr> entries,
                          std::string tag)
{
    auto check = [this](const AffineExpr& e) {
        for (const auto& t : e.terms)
            if (t.var < 0 || t.var >= num_variables())
                throw std::invalid_argument(
                    "cone references unregistered variable");
    };
    check(radius);
    for (const auto& e : entries)
        check(e);
    socs_.push_back({std::move(radius), std::move(entries), std::move(tag)});
    return static_cast<int>(socs_.size()) - 1;
}

double ConicProgram::objective_value(const std::vector<double>& x) const
{
    double v = obj_constant_;
    for (int i = 0; i < num_variables(); ++i)
        v += obj_lin_[i] * x[i] + obj_quad_[i] * x[i] * x[i];
    return v;
}

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Vec = Eigen::VectorXd;
using Triplet = Eigen::Triplet<double>;

double eval_affine(const AffineExpr& e, const std::vector<double>& x)
{
    double v = e.constant;
    for (const auto& t : e.terms)
        v += t.coeff * x[t.var];
    return v;
}

// min c'x  s.t.  A x = b,  G x + s = h,  s in K = R+^{n_lp} x SOC(q_1) x ...
struct StandardForm {
    int n = 0;
    SpMat A, G;
    Vec b, h, c;
    int n_lp = 0;
    std::vector<int> soc_dims;
    double obj_constant = 0.0;
    double obj_sign_scale = 1.0; // reserved
    int n_user = 0;              // original variables (epigraph vars follow)
};

StandardForm build_standard_form(const ConicProgram& p)
{
    StandardForm sf;
    sf.n_user = p.num_variables();
    sf.obj_constant = p.objective_constant();

    bool has_quad = false;
    for (double w : p.quadratic_objective())
        if (w > 0.0)
            has_quad = true;

    sf.n = sf.n_user + (has_quad ? 1 : 0);
    const int quad_var = has_quad ? sf.n_user : -1;

    sf.c = Vec::Zero(sf.n);
    for (int i = 0; i < sf.n_user; ++i)
        sf.c[i] = p.linear_objective()[i];
    if (has_quad)
        sf.c[quad_var] = 1.0;

    std::vector<Triplet> ta, tg;
    std::vector<double> bvals, hvals;

    auto add_eq = [&](const std::vector<LinTerm>& terms, double rhs) {
        int r = static_cast<int>(bvals.size());
        for (const auto& t : terms)
            ta.emplace_back(r, t.var, t.coeff);
        bvals.push_back(rhs);
    };
    // a'x <= rhs  =>  G row a, h = rhs
    auto add_le = [&](const std::vector<LinTerm>& terms, double rhs) {
        int r = static_cast<int>(hvals.size());
        for (const auto& t : terms)
            tg.emplace_back(r, t.var, t.coeff);
        hvals.push_back(rhs);
    };

    for (const auto& row : p.rows()) {
        switch (row.rel) {
        case Rel::Eq: add_eq(row.terms, row.rhs); break;
        case Rel::Le: add_le(row.terms, row.rhs); break;
        case Rel::Ge: {
            std::vector<LinTerm> neg = row.terms;
            for (auto& t : neg)
                t.coeff = -t.coeff;
            add_le(neg, -row.rhs);
            break;
        }
        }
    }
    for (int v = 0; v < sf.n_user; ++v) {
        double lb = p.lower(v), ub = p.upper(v);
        if (lb == ub) {
            add_eq({{v, 1.0}}, lb);
            continue;
        }
        if (std::isfinite(ub))
            add_le({{v, 1.0}}, ub);
        if (std::isfinite(lb))
            add_le({{v, -1.0}}, -lb);
    }
    sf.n_lp = static_cast<int>(hvals.size());

    // cone rows: s = h - Gx must reproduce (radius, entries...)
    auto add_cone_row = [&](const AffineExpr& e) {
        int r = static_cast<int>(hvals.size());
        for (const auto& t : e.terms)
            tg.emplace_back(r, t.var, -t.coeff);
        hvals.push_back(e.constant);
    };
    for (const auto& soc : p.soc_blocks()) {
        add_cone_row(soc.radius);
        for (const auto& e : soc.entries)
            add_cone_row(e);
        sf.soc_dims.push_back(static_cast<int>(soc.entries.size()) + 1);
    }
    if (has_quad) {
        // sum w_k x_k^2 <= q  as  ||(2 sqrt(w_k) x_k ..., q-1)|| <= q+1
        AffineExpr rad(quad_var, 1.0, 1.0);
        add_cone_row(rad);
        int dim = 1;
        for (int v = 0; v < sf.n_user; ++v) {
            double w = p.quadratic_objective()[v];
            if (w > 0.0) {
                add_cone_row(AffineExpr(v, 2.0 * std::sqrt(w)));
                ++dim;
            }
        }
        add_cone_row(AffineExpr(quad_var, 1.0, -1.0));
        ++dim;
        sf.soc_dims.push_back(dim);
    }

    const int p_eq = static_cast<int>(bvals.size());
    const int m = static_cast<int>(hvals.size());
    sf.A.resize(p_eq, sf.n);
    sf.A.setFromTriplets(ta.begin(), ta.end());
    sf.b = Eigen::Map<Vec>(bvals.data(), p_eq);
    sf.G.resize(m, sf.n);
    sf.G.setFromTriplets(tg.begin(), tg.end());
    sf.h = Eigen::Map<Vec>(hvals.data(), m);
    return sf;
}

// ---------------------------------------------------------------------------
// cone algebra over s stacked as [lp block | soc blocks]
// ---------------------------------------------------------------------------

struct ConeLayout {
    int n_lp = 0;
    std::vector<int> soc_off; // offsets of soc blocks
    std::vector<int> soc_dim;
    int m = 0;
    int degree() const { return n_lp + static_cast<int>(soc_dim.size()); }
};

double soc_det(const double* u, int d) // u0^2 - ||u1||^2
{
    double s = 0.0;
    for (int i = 1; i < d; ++i)
        s += u[i] * u[i];
    return u[0] * u[0] - s;
}

// distance to cone: max over blocks of the shift needed along e; < 0 means
// strictly interior
double max_step_to_cone(const ConeLayout& L, const Vec& u)
{
    double t = -kInf;
    for (int i = 0; i < L.n_lp; ++i)
        t = std::max(t, -u[i]);
    for (size_t k = 0; k < L.soc_off.size(); ++k) {
        const double* blk = u.data() + L.soc_off[k];
        double n1 = 0.0;
        for (int i = 1; i < L.soc_dim[k]; ++i)
            n1 += blk[i] * blk[i];
        t = std::max(t, std::sqrt(n1) - blk[0]);
    }
    return t;
}

void bring_to_cone(const ConeLayout& L, Vec& u)
{
    double t = max_step_to_cone(L, u);
    if (t >= -1e-8 * std::max(1.0, u.norm())) {
        double a = 1.0 + t;
        for (int i = 0; i < L.n_lp; ++i)
            u[i] += a;
        for (size_t k = 0; k < L.soc_off.size(); ++k)
            u[L.soc_off[k]] += a;
    }
}

// Nesterov-Todd scaling per block
struct Scaling {
    Vec w_lp;                      // sqrt(s/z) per lp coordinate
    std::vector<double> eta;       // per soc block
    std::vector<Vec> wbar;         // per soc block, unit hyperbolic norm
};

bool compute_scaling(const ConeLayout& L, const Vec& s, const Vec& z,
                     Scaling& W)
{
    W.w_lp.resize(L.n_lp);
    for (int i = 0; i < L.n_lp; ++i) {
        if (s[i] <= 0.0 || z[i] <= 0.0)
            return false;
        W.w_lp[i] = std::sqrt(s[i] / z[i]);
    }
    size_t nsoc = L.soc_off.size();
    W.eta.resize(nsoc);
    W.wbar.resize(nsoc);
    for (size_t k = 0; k < nsoc; ++k) {
        int off = L.soc_off[k], d = L.soc_dim[k];
        double ds = soc_det(s.data() + off, d);
        double dz = soc_det(z.data() + off, d);
        if (ds <= 0.0 || dz <= 0.0)
            return false;
        double sqds = std::sqrt(ds), sqdz = std::sqrt(dz);
        Vec sb = s.segment(off, d) / sqds;
        Vec zb = z.segment(off, d) / sqdz;
        double gamma = std::sqrt((1.0 + sb.dot(zb)) / 2.0);
        Vec wb(d);
        wb[0] = (sb[0] + zb[0]) / (2.0 * gamma);
        for (int i = 1; i < d; ++i)
            wb[i] = (sb[i] - zb[i]) / (2.0 * gamma);
        W.eta[k] = std::sqrt(sqds / sqdz);
        W.wbar[k] = std::move(wb);
    }
    return true;
}

// y = W u (symmetric scaling matrix)
void apply_W(const ConeLayout& L, const Scaling& W, const Vec& u, Vec& y)
{
    y.resize(L.m);
    for (int i = 0; i < L.n_lp; ++i)
        y[i] = W.w_lp[i] * u[i];
    for (size_t k = 0; k < L.soc_off.size(); ++k) {
        int off = L.soc_off[k], d = L.soc_dim[k];
        const Vec& wb = W.wbar[k];
        double a = 0.0;
        for (int i = 1; i < d; ++i)
            a += wb[i] * u[off + i];
        y[off] = W.eta[k] * (wb[0] * u[off] + a);
        double f = u[off] + a / (1.0 + wb[0]);
        for (int i = 1; i < d; ++i)
            y[off + i] = W.eta[k] * (u[off + i] + f * wb[i]);
    }
}

// y = W^{-1} u
void apply_Winv(const ConeLayout& L, const Scaling& W, const Vec& u, Vec& y)
{
    y.resize(L.m);
    for (int i = 0; i < L.n_lp; ++i)
        y[i] = u[i] / W.w_lp[i];
    for (size_t k = 0; k < L.soc_off.size(); ++k) {
        int off = L.soc_off[k], d = L.soc_dim[k];
        const Vec& wb = W.wbar[k];
        double a = 0.0;
        for (int i = 1; i < d; ++i)
            a += wb[i] * u[off + i];
        y[off] = (wb[0] * u[off] - a) / W.eta[k];
        double f = -u[off] + a / (1.0 + wb[0]);
        for (int i = 1; i < d; ++i)
            y[off + i] = (u[off + i] + f * wb[i]) / W.eta[k];
    }
}

// Jordan product u o v
void jordan_mul(const ConeLayout& L, const Vec& u, const Vec& v, Vec& y)
{
    y.resize(L.m);
    for (int i = 0; i < L.n_lp; ++i)
        y[i] = u[i] * v[i];
    for (size_t k = 0; k < L.soc_off.size(); ++k) {
        int off = L.soc_off[k], d = L.soc_dim[k];
        double dot = 0.0;
        for (int i = 0; i < d; ++i)
            dot += u[off + i] * v[off + i];
        double u0 = u[off], v0 = v[off];
        y[off] = dot;
        for (int i = 1; i < d; ++i)
            y[off + i] = u0 * v[off + i] + v0 * u[off + i];
    }
}

// y = lambda \ u  (solve lambda o y = u)
void jordan_div(const ConeLayout& L, const Vec& lambda, const Vec& u, Vec& y)
{
    y.resize(L.m);
    for (int i = 0; i < L.n_lp; ++i)
        y[i] = u[i] / lambda[i];
    for (size_t k = 0; k < L.soc_off.size(); ++k) {
        int off = L.soc_off[k], d = L.soc_dim[k];
        const double* lm = lambda.data() + off;
        double det = soc_det(lm, d);
        double dot = 0.0;
        for (int i = 1; i < d; ++i)
            dot += lm[i] * u[off + i];
        double y0 = (lm[0] * u[off] - dot) / det;
        y[off] = y0;
        for (int i = 1; i < d; ++i)
            y[off + i] = (u[off + i] - y0 * lm[i]) / lm[0];
    }
}

// identity element of the cone algebra
Vec cone_identity(const ConeLayout& L)
{
    Vec e = Vec::Zero(L.m);
    for (int i = 0; i < L.n_lp; ++i)
        e[i] = 1.0;
    for (size_t k = 0; k < L.soc_off.size(); ++k)
        e[L.soc_off[k]] = 1.0;
    return e;
}

// largest step alpha <= cap with u + alpha du staying in the cone
double step_to_boundary(const ConeLayout& L, const Vec& u, const Vec& du,
                        double cap)
{
    double alpha = cap;
    for (int i = 0; i < L.n_lp; ++i)
        if (du[i] < 0.0)
            alpha = std::min(alpha, -u[i] / du[i]);
    for (size_t k = 0; k < L.soc_off.size(); ++k) {
        int off = L.soc_off[k], d = L.soc_dim[k];
        const double* ub = u.data() + off;
        const double* db = du.data() + off;
        double a = soc_det(db, d);
        double c = soc_det(ub, d);
        double b = ub[0] * db[0];
        for (int i = 1; i < d; ++i)
            b -= ub[i] * db[i];
        // q(t) = c + 2 b t + a t^2 >= 0 and u0 + t du0 >= 0
        double root = kInf;
        if (std::abs(a) < 1e-14) {
            if (b < 0.0)
                root = -c / (2.0 * b);
        } else {
            double disc = b * b - a * c;
            if (a < 0.0) {
                // opens downward: one positive crossing
                disc = std::max(disc, 0.0);
                double r1 = (-b - std::sqrt(disc)) / a;
                double r2 = (-b + std::sqrt(disc)) / a;
                for (double r : {r1, r2})
                    if (r > 0.0)
                        root = std::min(root, r);
            } else if (disc >= 0.0) {
                double sq = std::sqrt(disc);
                double r1 = (-b - sq) / a;
                double r2 = (-b + sq) / a;
                for (double r : {r1, r2})
                    if (r > 0.0)
                        root = std::min(root, r);
                if (b >= 0.0 && c >= 0.0 && r1 <= 0.0 && r2 <= 0.0)
                    root = kInf; // stays nonnegative
                // if both roots positive the first crossing limits the step
            }
        }
        if (db[0] < 0.0)
            root = std::min(root, -ub[0] / db[0]);
        alpha = std::min(alpha, root);
    }
    return alpha;
}

} // namespace

// ---------------------------------------------------------------------------
// solver
// ---------------------------------------------------------------------------

struct ConicSolver::Impl {
    Eigen::SimplicialLDLT<SpMat, Eigen::Lower> ldlt;
    bool analyzed = false;
    size_t pattern_key = 0;

    // KKT matrix [0 A' G'; A 0 0; G 0 -W^2] with static regularization
    SpMat K;
    std::vector<Triplet> base_triplets; // A and G parts, fixed
    int n = 0, p = 0, m = 0;
    ConeLayout L;

    static constexpr double kStaticReg = 1e-10;

    size_t structure_key(const StandardForm& sf) const
    {
        size_t hsh = 1469598103934665603ull;
        auto mix = [&hsh](size_t v) {
            hsh ^= v + 0x9e3779b97f4a7c15ull + (hsh << 6) + (hsh >> 2);
        };
        mix(sf.n);
        mix(sf.A.rows());
        mix(sf.G.rows());
        mix(static_cast<size_t>(sf.A.nonZeros()));
        mix(static_cast<size_t>(sf.G.nonZeros()));
        for (int d : sf.soc_dims)
            mix(static_cast<size_t>(d));
        for (int k = 0; k < sf.A.outerSize(); ++k)
            for (SpMat::InnerIterator it(sf.A, k); it; ++it)
                mix(static_cast<size_t>(it.row() * 131 + it.col()));
        for (int k = 0; k < sf.G.outerSize(); ++k)
            for (SpMat::InnerIterator it(sf.G, k); it; ++it)
                mix(static_cast<size_t>(it.row() * 131 + it.col()));
        return hsh;
    }

    void build_kkt(const StandardForm& sf, const Scaling* W)
    {
        std::vector<Triplet> tr = base_triplets;
        // -W^2 block (lower triangle), or -I at initialization. The identity
        // case still emits explicit zeros on the soc off-diagonals so the
        // symbolic factorization covers the dense scaled blocks.
        const int zoff = n + p;
        if (!W) {
            for (int i = 0; i < m; ++i)
                tr.emplace_back(zoff + i, zoff + i, -1.0);
            for (size_t k = 0; k < L.soc_off.size(); ++k) {
                int off = L.soc_off[k], d = L.soc_dim[k];
                for (int i = 0; i < d; ++i)
                    for (int j = 0; j < i; ++j)
                        tr.emplace_back(zoff + i + off, zoff + j + off, 0.0);
            }
        } else {
            for (int i = 0; i < L.n_lp; ++i)
                tr.emplace_back(zoff + i, zoff + i,
                                -W->w_lp[i] * W->w_lp[i] - kStaticReg);
            for (size_t k = 0; k < L.soc_off.size(); ++k) {
                int off = L.soc_off[k], d = L.soc_dim[k];
                const Vec& wb = W->wbar[k];
                double e2 = W->eta[k] * W->eta[k];
                // W^2 = eta^2 (2 wbar wbar' - J)
                for (int i = 0; i < d; ++i) {
                    for (int j = 0; j <= i; ++j) {
                        double Jij = (i == j) ? (i == 0 ? 1.0 : -1.0) : 0.0;
                        double v = e2 * (2.0 * wb[i] * wb[j] - Jij);
                        double reg = (i == j) ? kStaticReg : 0.0;
                        tr.emplace_back(zoff + i + off, zoff + j + off,
                                        -v - reg);
                    }
                }
            }
        }
        K.resize(n + p + m, n + p + m);
        K.setFromTriplets(tr.begin(), tr.end());
    }

    void prepare(const StandardForm& sf)
    {
        n = sf.n;
        p = static_cast<int>(sf.A.rows());
        m = static_cast<int>(sf.G.rows());
        L.n_lp = sf.n_lp;
        L.m = m;
        L.soc_off.clear();
        L.soc_dim.clear();
        int off = sf.n_lp;
        for (int d : sf.soc_dims) {
            L.soc_off.push_back(off);
            L.soc_dim.push_back(d);
            off += d;
        }

        base_triplets.clear();
        // static regularization keeps the quasi-definite factorization alive
        for (int i = 0; i < n; ++i)
            base_triplets.emplace_back(i, i, kStaticReg);
        for (int i = 0; i < p; ++i)
            base_triplets.emplace_back(n + i, n + i, -kStaticReg);
        for (int k = 0; k < sf.A.outerSize(); ++k)
            for (SpMat::InnerIterator it(sf.A, k); it; ++it)
                base_triplets.emplace_back(n + static_cast<int>(it.row()),
                                           static_cast<int>(it.col()),
                                           it.value());
        for (int k = 0; k < sf.G.outerSize(); ++k)
            for (SpMat::InnerIterator it(sf.G, k); it; ++it)
                base_triplets.emplace_back(n + p + static_cast<int>(it.row()),
                                           static_cast<int>(it.col()),
                                           it.value());

        size_t key = structure_key(sf);
        if (!analyzed || key != pattern_key) {
            build_kkt(sf, nullptr);
            ldlt.analyzePattern(K);
            analyzed = true;
            pattern_key = key;
        }
    }

    // Solve K u = r with one round of iterative refinement against the
    // unregularized saddle system.
    Vec kkt_solve(const StandardForm& sf, const Scaling* W, const Vec& r)
    {
        Vec u = ldlt.solve(r);
        for (int pass = 0; pass < 2; ++pass) {
            Vec res = r - exact_mul(sf, W, u);
            if (res.lpNorm<Eigen::Infinity>() <
                1e-13 * std::max(1.0, r.lpNorm<Eigen::Infinity>()))
                break;
            u += ldlt.solve(res);
        }
        return u;
    }

    // unregularized KKT * u
    Vec exact_mul(const StandardForm& sf, const Scaling* W, const Vec& u) const
    {
        Vec r = Vec::Zero(n + p + m);
        Vec ux = u.head(n), uy = u.segment(n, p), uz = u.tail(m);
        r.head(n) = sf.A.transpose() * uy + sf.G.transpose() * uz;
        r.segment(n, p) = sf.A * ux;
        Vec Wuz;
        if (W) {
            Vec t1;
            apply_W(L, *W, uz, t1);
            apply_W(L, *W, t1, Wuz);
        } else {
            Wuz = uz;
        }
        r.tail(m) = sf.G * ux - Wuz;
        return r;
    }
};

ConicSolver::ConicSolver() : impl_(new Impl) {}
ConicSolver::~ConicSolver() { delete impl_; }
ConicSolver::ConicSolver(ConicSolver&& o) noexcept : impl_(o.impl_)
{
    o.impl_ = nullptr;
}
ConicSolver& ConicSolver::operator=(ConicSolver&& o) noexcept
{
    std::swap(impl_, o.impl_);
    return *this;
}

SolveReport ConicSolver::solve(const ConicProgram& prog,
                               const SolveTolerances& tol)
{
    StandardForm sf = build_standard_form(prog);
    Impl& im = *impl_;

    if (sf.G.rows() == 0)
        throw std::invalid_argument(
            "program has no inequality or cone constraints");

    im.prepare(sf);
    const int n = im.n, p = im.p, m = im.m;
    const ConeLayout& L = im.L;
    const double nu = static_cast<double>(L.degree());

    SolveReport rep;
    rep.x.assign(prog.num_variables(), 0.0);

    // --- initial point: least-squares primal/dual with identity scaling
    im.build_kkt(sf, nullptr);
    im.ldlt.factorize(im.K);
    if (im.ldlt.info() != Eigen::Success) {
        rep.status = SolveStatus::IterationLimit;
        return rep;
    }

    Vec r0 = Vec::Zero(n + p + m);
    r0.segment(n, p) = sf.b;
    r0.tail(m) = sf.h;
    Vec u0 = im.kkt_solve(sf, nullptr, r0);
    Vec x = u0.head(n);
    Vec y = u0.segment(n, p);
    Vec s = -u0.tail(m);
    bring_to_cone(L, s);

    Vec r1 = Vec::Zero(n + p + m);
    r1.head(n) = -sf.c;
    Vec u1 = im.kkt_solve(sf, nullptr, r1);
    Vec z = u1.tail(m);
    bring_to_cone(L, z);

    double tau = 1.0, kappa = 1.0;

    const double norm_b = std::max(1.0, sf.b.norm());
    const double norm_h = std::max(1.0, sf.h.norm());
    const double norm_c = std::max(1.0, sf.c.norm());

    Scaling W;
    Vec lambda, lxl, e = cone_identity(L);
    Vec ds_rhs, w_s, rhs(n + p + m);
    Vec dx(n), dy(p), dz(m), ds(m);

    for (int it = 0; it <= tol.max_iterations; ++it) {
        // residuals of the self-dual embedding
        Vec rx = sf.A.transpose() * y + sf.G.transpose() * z + sf.c * tau;
        Vec ry = sf.A * x - sf.b * tau;
        Vec rz = sf.G * x + s - sf.h * tau;
        double cx = sf.c.dot(x), by = sf.b.dot(y), hz = sf.h.dot(z);
        double rtau = kappa + cx + by + hz;
        double gap = s.dot(z);
        double mu = (gap + tau * kappa) / (nu + 1.0);

        double pres = std::max(ry.norm() / norm_b, rz.norm() / norm_h) / tau;
        double dres = rx.norm() / norm_c / tau;
        double pcost = cx / tau;
        double dcost = -(by + hz) / tau;
        double agap = gap / (tau * tau);
        double rgap = agap / std::max(1.0, std::abs(pcost));

        rep.iterations = it;
        rep.res_primal = pres;
        rep.res_dual = dres;
        rep.gap = agap;

        if (pres <= tol.feas && dres <= tol.feas &&
            (agap <= tol.abs_gap || rgap <= tol.rel_gap)) {
            rep.status = SolveStatus::Optimal;
            for (int i = 0; i < prog.num_variables(); ++i)
                rep.x[i] = x[i] / tau;
            rep.objective = prog.objective_value(rep.x);
            return rep;
        }

        // infeasibility certificates (homogeneous model: tau -> 0)
        if (tau < 1e-6 * std::max(1.0, kappa)) {
            if (by + hz < 0.0) {
                double scale = -1.0 / (by + hz);
                double pinfres =
                    (sf.A.transpose() * y + sf.G.transpose() * z).norm() *
                    scale / norm_c;
                if (pinfres <= 1e-7) {
                    rep.status = SolveStatus::Infeasible;
                    rep.objective = kInf;
                    return rep;
                }
            }
            if (cx < 0.0) {
                double scale = -1.0 / cx;
                double dinfres = std::max((sf.A * x).norm() / norm_b,
                                          (sf.G * x + s).norm() / norm_h) *
                                 scale;
                if (dinfres <= 1e-7) {
                    rep.status = SolveStatus::Unbounded;
                    rep.objective = -kInf;
                    return rep;
                }
            }
        }

        if (it == tol.max_iterations || mu < 1e-16)
            break;

        if (!compute_scaling(L, s, z, W))
            break;
        apply_W(L, W, z, lambda);
        jordan_mul(L, lambda, lambda, lxl);

        im.build_kkt(sf, &W);
        im.ldlt.factorize(im.K);
        if (im.ldlt.info() != Eigen::Success)
            break;

        Vec rc = Vec::Zero(n + p + m);
        rc.head(n) = -sf.c;
        rc.segment(n, p) = sf.b;
        rc.tail(m) = sf.h;
        Vec u_base = im.kkt_solve(sf, &W, rc);

        auto direction = [&](double sigma, const Vec& corr_s, double corr_tk,
                             double mu_target) {
            ds_rhs = -lxl;
            if (sigma > 0.0)
                ds_rhs += sigma * mu_target * e;
            if (corr_s.size() == L.m)
                ds_rhs -= corr_s;
            Vec ltmp;
            jordan_div(L, lambda, ds_rhs, ltmp);
            apply_W(L, W, ltmp, w_s);

            double eta_d = 1.0 - sigma;
            rhs.head(n) = -eta_d * rx;
            rhs.segment(n, p) = -eta_d * ry;
            rhs.tail(m) = -eta_d * rz - w_s;
            Vec v = im.kkt_solve(sf, &W, rhs);

            double dkt = -tau * kappa + sigma * mu_target - corr_tk;
            double num = -eta_d * rtau - sf.c.dot(v.head(n)) -
                         sf.b.dot(v.segment(n, p)) - sf.h.dot(v.tail(m)) -
                         dkt / tau;
            double den = sf.c.dot(u_base.head(n)) +
                         sf.b.dot(u_base.segment(n, p)) +
                         sf.h.dot(u_base.tail(m)) - kappa / tau;
            double dtau = num / den;

            dx = v.head(n) + dtau * u_base.head(n);
            dy = v.segment(n, p) + dtau * u_base.segment(n, p);
            dz = v.tail(m) + dtau * u_base.tail(m);
            Vec W2dz, t1;
            apply_W(L, W, dz, t1);
            apply_W(L, W, t1, W2dz);
            ds = w_s - W2dz;
            double dkappa = (dkt - kappa * dtau) / tau;
            return std::make_pair(dtau, dkappa);
        };

        // predictor
        auto [dtau_a, dkappa_a] = direction(0.0, Vec(), 0.0, mu);
        double alpha = step_to_boundary(L, s, ds, 10.0);
        alpha = std::min(alpha, step_to_boundary(L, z, dz, 10.0));
        if (dtau_a < 0.0)
            alpha = std::min(alpha, -tau / dtau_a);
        if (dkappa_a < 0.0)
            alpha = std::min(alpha, -kappa / dkappa_a);
        alpha = std::min(alpha, 1.0);

        double sigma = std::pow(1.0 - alpha, 3);
        sigma = std::clamp(sigma, 1e-8, 0.999);

        // corrector uses the scaled affine products
        Vec ws_a, wz_a, corr;
        apply_Winv(L, W, ds, ws_a);
        apply_W(L, W, dz, wz_a);
        jordan_mul(L, ws_a, wz_a, corr);
        double corr_tk = dtau_a * dkappa_a;

        auto [dtau, dkappa] = direction(sigma, corr, corr_tk, mu);
        alpha = step_to_boundary(L, s, ds, 10.0);
        alpha = std::min(alpha, step_to_boundary(L, z, dz, 10.0));
        if (dtau < 0.0)
            alpha = std::min(alpha, -tau / dtau);
        if (dkappa < 0.0)
            alpha = std::min(alpha, -kappa / dkappa);
        alpha = std::min(0.98 * alpha, 1.0);

        x += alpha * dx;
        y += alpha * dy;
        z += alpha * dz;
        s += alpha * ds;
        tau += alpha * dtau;
        kappa += alpha * dkappa;
    }

    // classify the stall
    if (tau < 1e-8 * std::max(1.0, kappa))
        rep.status = (sf.c.dot(x) < 0.0) ? SolveStatus::Unbounded
                                         : SolveStatus::Infeasible;
    else
        rep.status = SolveStatus::IterationLimit;
    for (int i = 0; i < prog.num_variables(); ++i)
        rep.x[i] = x[i] / std::max(tau, 1e-300);
    rep.objective = prog.objective_value(rep.x);
    return rep;
}

SolveReport solve(const ConicProgram& p, const SolveTolerances& tol)
{
    ConicSolver solver;
    return solver.solve(p, tol);
}

ViolationReport verify_solution(const ConicProgram& p,
                                const std::vector<double>& x)
{
    ViolationReport rep;
    auto consider = [&rep](double viol, const std::string& what) {
        if (viol > rep.max_violation) {
            rep.max_violation = viol;
            rep.worst_constraint = what;
        }
    };

    for (int v = 0; v < p.num_variables(); ++v) {
        if (std::isfinite(p.lower(v)))
            consider(p.lower(v) - x[v], "lb:" + p.name(v));
        if (std::isfinite(p.upper(v)))
            consider(x[v] - p.upper(v), "ub:" + p.name(v));
    }
    int idx = 0;
    for (const auto& row : p.rows()) {
        double lhs = 0.0;
        for (const auto& t : row.terms)
            lhs += t.coeff * x[t.var];
        double viol = 0.0;
        switch (row.rel) {
        case Rel::Eq: viol = std::abs(lhs - row.rhs); break;
        case Rel::Le: viol = lhs - row.rhs; break;
        case Rel::Ge: viol = row.rhs - lhs; break;
        }
        consider(viol, row.tag.empty() ? "row#" + std::to_string(idx)
                                       : row.tag);
        ++idx;
    }
    idx = 0;
    for (const auto& soc : p.soc_blocks()) {
        double t = eval_affine(soc.radius, x);
        double nrm = 0.0;
        for (const auto& e : soc.entries) {
            double v = eval_affine(e, x);
            nrm += v * v;
        }
        consider(std::sqrt(nrm) - t,
                 soc.tag.empty() ? "soc#" + std::to_string(idx) : soc.tag);
        ++idx;
    }
    return rep;
}

void dump_program(const ConicProgram& p, std::ostream& os)
{
    os << "variables " << p.num_variables() << "\n";
    for (int v = 0; v < p.num_variables(); ++v) {
        os << "  " << p.name(v) << " in [" << p.lower(v) << ", " << p.upper(v)
           << "]";
        if (p.linear_objective()[v] != 0.0)
            os << " cost " << p.linear_objective()[v];
        if (p.quadratic_objective()[v] != 0.0)
            os << " quad " << p.quadratic_objective()[v];
        os << "\n";
    }
    os << "rows " << p.rows().size() << "\n";
    for (const auto& row : p.rows()) {
        os << " ";
        for (const auto& t : row.terms)
            os << " " << (t.coeff >= 0 ? "+" : "") << t.coeff << "*"
               << p.name(t.var);
        os << (row.rel == Rel::Eq ? " == " : row.rel == Rel::Le ? " <= "
                                                                : " >= ")
           << row.rhs;
        if (!row.tag.empty())
            os << "   # " << row.tag;
        os << "\n";
    }
    auto put_affine = [&os, &p](const AffineExpr& e) {
        os << "(";
        for (const auto& t : e.terms)
            os << (t.coeff >= 0 ? "+" : "") << t.coeff << "*" << p.name(t.var);
        if (e.constant != 0.0)
            os << (e.constant >= 0 ? "+" : "") << e.constant;
        os << ")";
    };
    os << "cones " << p.soc_blocks().size() << "\n";
    for (const auto& soc : p.soc_blocks()) {
        os << "  ||";
        for (const auto& e : soc.entries)
            put_affine(e);
        os << "|| <= ";
        put_affine(soc.radius);
        if (!soc.tag.empty())
            os << "   # " << soc.tag;
        os << "\n";
    }
}

} // namespace park
