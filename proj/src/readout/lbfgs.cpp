#include "bsnn/readout.hpp"

#include <cmath>
#include <deque>
#include <limits>
#include <optional>

namespace bsnn::readout {

namespace {

constexpr double kC1 = 1e-4; // sufficient decrease
constexpr double kC2 = 0.9;  // curvature

struct Point {
    double alpha = 0.0;
    double value = 0.0;
    double slope = 0.0; // directional derivative
    Vector x;
    Vector grad;
};

class LineSearch {
  public:
    LineSearch(const Objective& f, const Vector& x0, const Vector& d, double f0, double slope0,
               int budget)
        : f_(f), x0_(x0), d_(d), f0_(f0), slope0_(slope0), budget_(budget) {}

    // Returns a step satisfying the strong Wolfe conditions, or nullopt.
    std::optional<Point> run(double alpha) {
        Point prev{0.0, f0_, slope0_, x0_, {}};
        for (int i = 0; budget_ > 0; ++i) {
            Point cur = eval(alpha);
            if (!std::isfinite(cur.value) || cur.value > f0_ + kC1 * alpha * slope0_ ||
                (i > 0 && cur.value >= prev.value)) {
                return zoom(prev, cur);
            }
            if (std::abs(cur.slope) <= -kC2 * slope0_) return cur;
            if (cur.slope >= 0) return zoom(cur, prev);
            prev = std::move(cur);
            alpha *= 2.0;
        }
        return std::nullopt;
    }

  private:
    Point eval(double alpha) {
        --budget_;
        Point p;
        p.alpha = alpha;
        p.x = x0_ + alpha * d_;
        p.value = f_(p.x, p.grad);
        p.slope = p.grad.dot(d_);
        return p;
    }

    static double cubic_min(const Point& a, const Point& b) {
        const double d1 = a.slope + b.slope - 3.0 * (a.value - b.value) / (a.alpha - b.alpha);
        const double disc = d1 * d1 - a.slope * b.slope;
        if (disc < 0 || !std::isfinite(disc)) return std::numeric_limits<double>::quiet_NaN();
        const double d2 = std::copysign(std::sqrt(disc), b.alpha - a.alpha);
        return b.alpha - (b.alpha - a.alpha) * (b.slope + d2 - d1) / (b.slope - a.slope + 2.0 * d2);
    }

    std::optional<Point> zoom(Point lo, Point hi) {
        while (budget_ > 0) {
            const double left = std::min(lo.alpha, hi.alpha), right = std::max(lo.alpha, hi.alpha);
            const double width = right - left;
            if (width <= 1e-16 * std::max(1.0, right)) break;
            double alpha = std::isfinite(hi.value) ? cubic_min(lo, hi) : std::numeric_limits<double>::quiet_NaN();
            if (!std::isfinite(alpha) || alpha < left + 0.1 * width || alpha > right - 0.1 * width) {
                alpha = 0.5 * (left + right);
            }
            Point cur = eval(alpha);
            if (!std::isfinite(cur.value) || cur.value > f0_ + kC1 * alpha * slope0_ ||
                cur.value >= lo.value) {
                hi = std::move(cur);
                continue;
            }
            if (std::abs(cur.slope) <= -kC2 * slope0_) return cur;
            if (cur.slope * (hi.alpha - lo.alpha) >= 0) hi = lo;
            lo = std::move(cur);
        }
        // Out of budget: accept the best sufficient-decrease point if any.
        if (lo.alpha > 0.0) return lo;
        return std::nullopt;
    }

    const Objective& f_;
    const Vector& x0_;
    const Vector& d_;
    double f0_;
    double slope0_;
    int budget_;
};

double max_abs(const Vector& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

} // namespace

LbfgsResult minimize_lbfgs(const Objective& f, Vector x0, const LbfgsOptions& options) {
    LbfgsResult r;
    r.x = std::move(x0);
    Vector g;
    r.value = f(r.x, g);
    r.gradient_norm = max_abs(g);
    if (!std::isfinite(r.value)) throw std::runtime_error("objective is not finite at the start point");
    if (r.gradient_norm <= options.gradient_tolerance) {
        r.converged = true;
        return r;
    }

    std::deque<Vector> S, Y;
    std::deque<double> rho;
    int stalls = 0;
    for (r.iterations = 1; r.iterations <= options.max_iterations; ++r.iterations) {
        // Two-loop recursion.
        Vector d = -g;
        std::vector<double> a(S.size());
        for (std::size_t i = S.size(); i-- > 0;) {
            a[i] = rho[i] * S[i].dot(d);
            d -= a[i] * Y[i];
        }
        if (!S.empty()) d *= S.back().dot(Y.back()) / Y.back().squaredNorm();
        for (std::size_t i = 0; i < S.size(); ++i) {
            const double beta = rho[i] * Y[i].dot(d);
            d += (a[i] - beta) * S[i];
        }
        double slope = g.dot(d);
        if (!(slope < 0)) {
            S.clear();
            Y.clear();
            rho.clear();
            d = -g;
            slope = g.dot(d);
        }
        const double alpha0 = S.empty() ? std::min(1.0, 1.0 / d.norm()) : 1.0;

        LineSearch search(f, r.x, d, r.value, slope, options.max_line_search);
        auto step = search.run(alpha0);
        if (!step) {
            if (S.empty()) break;
            S.clear();
            Y.clear();
            rho.clear();
            continue;
        }
        const Vector s = step->x - r.x;
        const Vector y = step->grad - g;
        const double improvement = r.value - step->value;
        r.x = std::move(step->x);
        g = std::move(step->grad);
        r.value = step->value;
        r.gradient_norm = max_abs(g);
        if (r.gradient_norm <= options.gradient_tolerance) {
            r.converged = true;
            return r;
        }
        const double sy = s.dot(y);
        if (sy > 1e-12 * s.norm() * y.norm()) {
            S.push_back(s);
            Y.push_back(y);
            rho.push_back(1.0 / sy);
            if (static_cast<int>(S.size()) > options.history) {
                S.pop_front();
                Y.pop_front();
                rho.pop_front();
            }
        }
        stalls = improvement <= 1e-15 * std::max(1.0, std::abs(r.value)) ? stalls + 1 : 0;
        if (stalls >= 3) break;
    }
    r.iterations = std::min(r.iterations, options.max_iterations);
    return r;
}

} // namespace bsnn::readout
