#pragma once

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "dfedsat/rng.hpp"

namespace dfedsat {

// Optical ISL link budget. All quantities SI; defaults follow the usual
// 1550 nm / 2 GHz laser terminal operating point.
struct LinkBudgetParams {
    double wavelength_m = 1550e-9;
    double transmit_power_w = 1e-2;  // 10 dBm
    double bandwidth_hz = 2e9;
    double tx_efficiency = 0.8;
    double rx_efficiency = 0.8;
    double telescope_diameter_m = 75e-3;
    double responsivity_a_per_w = 0.6;
    double pointing_sigma_rad = 6e-6;
    double dark_current_a = 1e-9;
    double noise_temperature_k = 500.0;
    double load_resistance_ohm = 1000.0;
    double snr_threshold_db = 20.0;
    double snr_threshold_linear = 100.0;

    static constexpr double kElectronCharge = 1.602176634e-19;
    static constexpr double kBoltzmann = 1.380649e-23;

    void set_snr_threshold_db(double db) {
        snr_threshold_db = db;
        snr_threshold_linear = std::pow(10.0, db / 10.0);
    }
    void set_transmit_power_dbm(double dbm) { transmit_power_w = 1e-3 * std::pow(10.0, dbm / 10.0); }

    void validate() const {
        if (wavelength_m <= 0 || transmit_power_w < 0 || bandwidth_hz <= 0 ||
            telescope_diameter_m <= 0 || responsivity_a_per_w <= 0 || pointing_sigma_rad <= 0 ||
            dark_current_a <= 0 || noise_temperature_k <= 0 || load_resistance_ohm <= 0 ||
            snr_threshold_linear <= 0)
            throw std::invalid_argument("link budget parameters must be positive");
        if (tx_efficiency <= 0 || tx_efficiency > 1 || rx_efficiency <= 0 || rx_efficiency > 1)
            throw std::invalid_argument("optical efficiencies must lie in (0, 1]");
    }
};

struct NoiseVariances {
    double shot_a2 = 0.0;      // signal shot noise
    double dark_a2 = 0.0;      // dark current noise
    double thermal_a2 = 0.0;   // thermal-Johnson noise
    double total() const { return shot_a2 + dark_a2 + thermal_a2; }
};

// G = (pi * D / lambda)^2, identical transmit and receive telescopes.
inline double telescope_gain(const LinkBudgetParams& p) {
    const double g = M_PI * p.telescope_diameter_m / p.wavelength_m;
    return g * g;
}

// P_R = P_T * etaT * etaR * G^2 * exp(-G * (thetaT^2 + thetaR^2)) * (lambda / (4 pi l))^2.
// pointing_sq is the summed squared radial pointing error thetaT^2 + thetaR^2.
inline double received_power(const LinkBudgetParams& p, double distance_m, double pointing_sq) {
    if (distance_m <= 0.0) throw std::invalid_argument("distance must be > 0");
    if (pointing_sq < 0.0) pointing_sq = 0.0;
    const double g = telescope_gain(p);
    const double spread = p.wavelength_m / (4.0 * M_PI * distance_m);
    return p.transmit_power_w * p.tx_efficiency * p.rx_efficiency * g * g *
           std::exp(-g * pointing_sq) * spread * spread;
}

inline NoiseVariances noise_variances(const LinkBudgetParams& p, double received_power_w) {
    NoiseVariances n;
    n.shot_a2 = 2.0 * LinkBudgetParams::kElectronCharge * p.responsivity_a_per_w *
                received_power_w * p.bandwidth_hz;
    n.dark_a2 = 2.0 * LinkBudgetParams::kElectronCharge * p.dark_current_a * p.bandwidth_hz;
    n.thermal_a2 = 4.0 * LinkBudgetParams::kBoltzmann * p.noise_temperature_k * p.bandwidth_hz /
                   p.load_resistance_ohm;
    return n;
}

// SNR = P_R / (sigma_dc^2 + sigma_th^2 + sigma_sn^2), taken as written even
// though the numerator is optical watts and the denominator is A^2.
inline double snr(const LinkBudgetParams& p, double distance_m, double pointing_sq) {
    const double pr = received_power(p, distance_m, pointing_sq);
    return pr / noise_variances(p, pr).total();
}

inline double data_rate_bps(const LinkBudgetParams& p, double snr_linear) {
    if (snr_linear < 0.0) throw std::invalid_argument("snr must be >= 0");
    return p.bandwidth_hz * std::log2(1.0 + snr_linear);
}

// CDF of X = thetaT^2 + thetaR^2 ~ Gamma(shape 2, scale 2*sigma^2); each theta
// carries two independent Normal(0, sigma^2) axes, so X is sigma^2 * chi^2_4.
inline double pointing_cdf(const LinkBudgetParams& p, double x) {
    if (x <= 0.0) return 0.0;
    const double s = 2.0 * p.pointing_sigma_rad * p.pointing_sigma_rad;
    const double t = x / s;
    return 1.0 - std::exp(-t) * (1.0 + t);
}

// p = P[SNR > gamma_th]. Inverting the SNR through the pointing loss gives the
// threshold on X = thetaT^2 + thetaR^2, then the Gamma CDF supplies the mass.
inline double success_probability(const LinkBudgetParams& p, double distance_m) {
    if (distance_m <= 0.0) throw std::invalid_argument("distance must be > 0");
    if (p.transmit_power_w <= 0.0) return 0.0;

    const double gamma_th = p.snr_threshold_linear;
    const double a = 2.0 * LinkBudgetParams::kElectronCharge * p.responsivity_a_per_w *
                     p.bandwidth_hz;  // shot-noise factor per watt of signal
    const NoiseVariances base = noise_variances(p, 0.0);
    const double n0 = base.dark_a2 + base.thermal_a2;
    if (gamma_th * a >= 1.0) return 0.0;  // shot noise alone caps SNR below the threshold

    const double power_threshold = gamma_th * n0 / (1.0 - gamma_th * a);
    const double p0 = received_power(p, distance_m, 0.0);
    if (power_threshold >= p0) return 0.0;

    const double x_th = std::log(p0 / power_threshold) / telescope_gain(p);
    return pointing_cdf(p, x_th);
}

// Bernoulli(p) packet reception mask, one entry per packet.
inline std::vector<std::uint8_t> sample_packet_mask(double p, int num_packets, Rng& rng) {
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("probability must lie in [0, 1]");
    if (num_packets < 1) throw std::invalid_argument("need at least one packet");
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(num_packets));
    std::bernoulli_distribution coin(p);
    for (auto& m : mask) m = coin(rng) ? 1 : 0;
    return mask;
}

}  // namespace dfedsat
