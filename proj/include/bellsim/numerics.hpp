#pragma once

// Regularized incomplete gamma functions (series + continued fraction) and
// the chi-square survival function built on them.

namespace bellsim {

double regularized_gamma_p(double a, double x);  // lower
double regularized_gamma_q(double a, double x);  // upper

// P(X >= stat) for X chi-square with dof degrees of freedom.
double chi2_survival(double stat, int dof);

}  // namespace bellsim
