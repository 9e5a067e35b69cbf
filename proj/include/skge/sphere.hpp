#ifndef SKGE_SPHERE_HPP
#define SKGE_SPHERE_HPP

#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

namespace skge {

// Parameters of the spherization map. The map sends a latent vector
// v in R^D to a point on the radius-R sphere embedded in R^(D+1):
//
//   theta_i = delta + (pi/2 - 2*delta) * sigmoid(scale * v_i)
//   x_1     = R * cos(theta_1)
//   x_k     = R * sin(theta_1)...sin(theta_{k-1}) * cos(theta_k)
//   x_{D+1} = R * sin(theta_1)...sin(theta_D)
//
// Angles stay inside (delta, pi/2 - delta), so every coordinate is strictly
// positive and no sine/cosine factor collapses to zero. `scale` is a single
// scalar; it stays fixed at 1.0 except in the learnable-scale model variant.
template <typename T>
struct SpherizationParams {
    T radius = T(1);
    T scale = T(1);
    T angle_margin = T(1e-4);  // delta
    T epsilon = T(1e-9);       // stabilizer of the ambient projection

    void validate() const {
        if (!(radius > T(0))) throw std::invalid_argument("SpherizationParams: radius must be > 0");
        if (!(scale > T(0))) throw std::invalid_argument("SpherizationParams: scale must be > 0");
        if (!(angle_margin > T(0)) || !(angle_margin < T(std::numbers::pi / 4)))
            throw std::invalid_argument("SpherizationParams: angle_margin must be in (0, pi/4)");
        if (!(epsilon > T(0))) throw std::invalid_argument("SpherizationParams: epsilon must be > 0");
    }
};

// Everything the backward pass needs from one forward evaluation.
// prefix[k] = R * prod_{j<k} sin(theta_j), so prefix[0] = R and
// coords[k] = prefix[k] * cos(theta_k) for k < D, coords[D] = prefix[D].
template <typename T>
struct SpherizeCache {
    std::vector<T> input;      // v, length D
    std::vector<T> sig;        // sigmoid(scale * v), length D
    std::vector<T> sin_theta;  // length D
    std::vector<T> cos_theta;  // length D
    std::vector<T> prefix;     // length D+1
    std::vector<T> coords;     // length D+1

    void resize(size_t dim) {
        input.resize(dim);
        sig.resize(dim);
        sin_theta.resize(dim);
        cos_theta.resize(dim);
        prefix.resize(dim + 1);
        coords.resize(dim + 1);
    }
};

template <typename T>
inline T stable_sigmoid(T z) {
    if (z >= T(0)) {
        return T(1) / (T(1) + std::exp(-z));
    }
    const T e = std::exp(z);
    return e / (T(1) + e);
}

// Latent vector -> point on the radius-R sphere. `out` has length v.size()+1.
// The cache is optional; pass one when a backward pass will follow.
template <typename T>
void spherize_forward(std::span<const T> v, const SpherizationParams<T>& params,
                      std::span<T> out, SpherizeCache<T>* cache = nullptr) {
    const size_t dim = v.size();
    if (dim < 1) throw std::invalid_argument("spherize_forward: latent dimension must be >= 1");
    if (out.size() != dim + 1) throw std::invalid_argument("spherize_forward: output must have length D+1");
    for (size_t i = 0; i < dim; ++i) {
        if (!std::isfinite(v[i])) throw std::invalid_argument("spherize_forward: non-finite input");
    }
    const T span = T(std::numbers::pi / 2) - T(2) * params.angle_margin;
    if (cache) cache->resize(dim);

    T prefix = params.radius;
    for (size_t i = 0; i < dim; ++i) {
        const T sig = stable_sigmoid(params.scale * v[i]);
        const T theta = params.angle_margin + span * sig;
        const T st = std::sin(theta);
        const T ct = std::cos(theta);
        out[i] = prefix * ct;
        if (cache) {
            cache->input[i] = v[i];
            cache->sig[i] = sig;
            cache->sin_theta[i] = st;
            cache->cos_theta[i] = ct;
            cache->prefix[i] = prefix;
            cache->coords[i] = out[i];
        }
        prefix *= st;
    }
    out[dim] = prefix;
    if (cache) {
        cache->prefix[dim] = prefix;
        cache->coords[dim] = prefix;
    }
}

// Pullback of an ambient gradient through the spherization map:
// grad_v = J^T grad_out with J = dx/dv, plus the scalar scale gradient.
// `grad_scale` may be null when the scale parameter is frozen.
template <typename T>
void spherize_backward(const SpherizeCache<T>& cache, const SpherizationParams<T>& params,
                       std::span<const T> grad_out, std::span<T> grad_v, T* grad_scale) {
    const size_t dim = cache.input.size();
    if (grad_out.size() != dim + 1 || grad_v.size() != dim)
        throw std::invalid_argument("spherize_backward: dimension mismatch");
    const T span = T(std::numbers::pi / 2) - T(2) * params.angle_margin;

    // suffix = sum_{k>i} grad_out[k] * coords[k]; coordinates k > i carry
    // sin(theta_i) as a factor, coordinate i carries cos(theta_i).
    T suffix = grad_out[dim] * cache.coords[dim];
    for (size_t ii = dim; ii-- > 0;) {
        const T g_theta = -grad_out[ii] * cache.prefix[ii] * cache.sin_theta[ii] +
                          (cache.cos_theta[ii] / cache.sin_theta[ii]) * suffix;
        const T dtheta_dz = span * cache.sig[ii] * (T(1) - cache.sig[ii]);
        grad_v[ii] = g_theta * dtheta_dz * params.scale;
        if (grad_scale) *grad_scale += g_theta * dtheta_dz * cache.input[ii];
        suffix += grad_out[ii] * cache.coords[ii];
    }
}

// Ambient projection back onto the radius-R sphere: R * p / (||p|| + eps).
// Total for every finite p; p = 0 maps to 0.
template <typename T>
void project_to_sphere(std::span<const T> p, T radius, T eps, std::span<T> out) {
    if (out.size() != p.size()) throw std::invalid_argument("project_to_sphere: dimension mismatch");
    T sq = T(0);
    for (size_t i = 0; i < p.size(); ++i) {
        if (!std::isfinite(p[i])) throw std::invalid_argument("project_to_sphere: non-finite input");
        sq += p[i] * p[i];
    }
    const T scale = radius / (std::sqrt(sq) + eps);
    for (size_t i = 0; i < p.size(); ++i) out[i] = p[i] * scale;
}

// J^T of the projection. The gradient of p -> R p/(||p||+eps) splits into a
// pass-through of the tangential component and a damped radial component:
//   grad_p = R/(n+eps) * g - R/((n+eps)^2 n) * (p.g) p,   n = ||p||.
// Undefined at p = 0 (a degenerate translation), which is reported.
template <typename T>
void project_backward(std::span<const T> p, T radius, T eps,
                      std::span<const T> grad_out, std::span<T> grad_p) {
    if (grad_out.size() != p.size() || grad_p.size() != p.size())
        throw std::invalid_argument("project_backward: dimension mismatch");
    T sq = T(0), dot = T(0);
    for (size_t i = 0; i < p.size(); ++i) {
        sq += p[i] * p[i];
        dot += p[i] * grad_out[i];
    }
    const T n = std::sqrt(sq);
    if (n == T(0)) throw std::domain_error("project_backward: gradient undefined at ||p|| = 0");
    const T a = radius / (n + eps);
    const T b = radius * dot / ((n + eps) * (n + eps) * n);
    for (size_t i = 0; i < p.size(); ++i) grad_p[i] = a * grad_out[i] - b * p[i];
}

template <typename T>
T chord_distance(std::span<const T> a, std::span<const T> b) {
    if (a.size() != b.size()) throw std::invalid_argument("chord_distance: dimension mismatch");
    T sq = T(0);
    for (size_t i = 0; i < a.size(); ++i) {
        const T d = a[i] - b[i];
        sq += d * d;
    }
    return std::sqrt(sq);
}

// Central-difference gradient check for a scalar function. Returns the
// maximum relative error between `analytic` and the numeric gradient,
// with max(1, |analytic component|) as the denominator.
inline double finite_diff_check(const std::function<double(std::span<const double>)>& f,
                                std::span<double> x, std::span<const double> analytic,
                                double h = 1e-5) {
    if (x.size() != analytic.size())
        throw std::invalid_argument("finite_diff_check: dimension mismatch");
    double worst = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        const double saved = x[i];
        x[i] = saved + h;
        const double fp = f(x);
        x[i] = saved - h;
        const double fm = f(x);
        x[i] = saved;
        const double numeric = (fp - fm) / (2.0 * h);
        const double denom = std::max(1.0, std::fabs(analytic[i]));
        worst = std::max(worst, std::fabs(numeric - analytic[i]) / denom);
    }
    return worst;
}

}  // namespace skge

#endif  // SKGE_SPHERE_HPP
