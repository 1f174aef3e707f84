#pragma once

namespace synprobe::special {

// Regularized incomplete beta I_x(a, b).
double incomplete_beta(double a, double b, double x);
// Regularized lower/upper incomplete gamma P(a, x), Q(a, x).
double gamma_p(double a, double x);
double gamma_q(double a, double x);

// Student t with `df` degrees of freedom.
double student_t_sf(double t, double df);           // P(T > t)
double student_t_two_sided_p(double t, double df);  // P(|T| > |t|)
double chi_square_sf(double x, double df);

}  // namespace synprobe::special
