#include <cmath>
#include <deque>

#include "internal.hpp"

namespace keytap::detail {

LbfgsResult minimize_lbfgs(const std::function<double(const Eigen::VectorXd&, Eigen::VectorXd*)>& objective,
                           Eigen::VectorXd x0, int max_iter, double tol, int history) {
  LbfgsResult r;
  r.x = std::move(x0);
  Eigen::VectorXd g(r.x.size());
  r.value = objective(r.x, &g);

  std::deque<Eigen::VectorXd> s_hist, y_hist;
  std::deque<double> rho_hist;

  for (int it = 0; it < max_iter; ++it) {
    if (g.lpNorm<Eigen::Infinity>() <= tol) {
      r.converged = true;
      r.iterations = it;
      return r;
    }

    // Two-loop recursion for the search direction.
    Eigen::VectorXd q = g;
    std::vector<double> alpha(s_hist.size());
    for (int i = static_cast<int>(s_hist.size()) - 1; i >= 0; --i) {
      alpha[i] = rho_hist[i] * s_hist[i].dot(q);
      q -= alpha[i] * y_hist[i];
    }
    double gamma = 1.0;
    if (!s_hist.empty()) {
      gamma = s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    } else {
      gamma = 1.0 / std::max(1.0, g.norm());
    }
    q *= gamma;
    for (std::size_t i = 0; i < s_hist.size(); ++i) {
      const double beta = rho_hist[i] * y_hist[i].dot(q);
      q += s_hist[i] * (alpha[i] - beta);
    }
    Eigen::VectorXd dir = -q;
    double slope = g.dot(dir);
    if (slope >= 0.0) {
      // Curvature history went stale; restart from steepest descent.
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      dir = -g / std::max(1.0, g.norm());
      slope = g.dot(dir);
    }

    double step = 1.0;
    Eigen::VectorXd x_new, g_new(r.x.size());
    double f_new = 0.0;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      x_new = r.x + step * dir;
      f_new = objective(x_new, &g_new);
      if (std::isfinite(f_new) && f_new <= r.value + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      r.iterations = it;
      return r;
    }

    Eigen::VectorXd s = x_new - r.x;
    Eigen::VectorXd yv = g_new - g;
    const double sy = s.dot(yv);
    const double f_old = r.value;
    r.x = std::move(x_new);
    g = g_new;
    r.value = f_new;
    if (sy > 1e-12) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(yv));
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > history) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    if (std::abs(f_old - f_new) <= 1e-12 * std::max(1.0, std::abs(f_old))) {
      r.converged = true;
      r.iterations = it + 1;
      return r;
    }
  }
  r.iterations = max_iter;
  r.converged = g.lpNorm<Eigen::Infinity>() <= tol;
  return r;
}

}  // namespace keytap::detail
