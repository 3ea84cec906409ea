#pragma once

namespace sirid {

/// Standard normal CDF.
double normal_cdf(double x);

/// Standard normal quantile. Wichura's AS241 (PPND16) rational approximation,
/// relative accuracy about 1e-16 on (0, 1). Throws outside the open interval.
double normal_quantile(double p);

}  // namespace sirid
