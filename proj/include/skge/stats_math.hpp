#ifndef SKGE_STATS_MATH_HPP
#define SKGE_STATS_MATH_HPP

namespace skge {

// Regularized incomplete beta I_x(a, b), by the Lentz continued fraction.
double regularized_incomplete_beta(double a, double b, double x);

// Two-sided Student-t tail probability P(|T| >= |t|) with df degrees of
// freedom, via I_x(df/2, 1/2) at x = df / (df + t^2).
double student_t_two_sided_p(double t, double df);

}  // namespace skge

#endif  // SKGE_STATS_MATH_HPP
