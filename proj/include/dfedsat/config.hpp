#pragma once

#include <cmath>
#include <fstream>
#include <string>

#include <json.hpp>

#include "dfedsat/experiment.hpp"

namespace dfedsat {

using json = nlohmann::json;

namespace detail {

inline double deg2rad(double deg) { return deg * M_PI / 180.0; }

template <typename T>
inline T get_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key) || j.at(key).is_null()) return fallback;
    return j.at(key).get<T>();
}

}  // namespace detail

inline ConstellationConfig constellation_from_json(const json& j) {
    ConstellationConfig c;
    c.num_planes = detail::get_or(j, "planes", 1);
    c.sats_per_plane = detail::get_or(j, "sats_per_plane", 1);
    c.altitude_m = detail::get_or(j, "altitude_m", 604e3);
    c.inclination_rad = detail::deg2rad(detail::get_or(j, "inclination_deg", 0.0));
    c.raan_spread_rad = detail::deg2rad(detail::get_or(j, "raan_spread_deg", 360.0));
    c.phase_offset_rad = detail::deg2rad(detail::get_or(j, "phase_offset_deg", 0.0));
    if (j.contains("link_distance_override_m") && !j.at("link_distance_override_m").is_null())
        c.link_distance_override_m = j.at("link_distance_override_m").get<double>();
    return c;
}

inline LinkBudgetParams link_from_json(const json& j) {
    LinkBudgetParams p;
    p.wavelength_m = detail::get_or(j, "wavelength_nm", 1550.0) * 1e-9;
    p.set_transmit_power_dbm(detail::get_or(j, "tx_power_dbm", 10.0));
    p.bandwidth_hz = detail::get_or(j, "bandwidth_ghz", 2.0) * 1e9;
    p.tx_efficiency = detail::get_or(j, "tx_eff", 0.8);
    p.rx_efficiency = detail::get_or(j, "rx_eff", 0.8);
    p.telescope_diameter_m = detail::get_or(j, "telescope_mm", 75.0) * 1e-3;
    p.responsivity_a_per_w = detail::get_or(j, "responsivity", 0.6);
    p.pointing_sigma_rad = detail::get_or(j, "pointing_sigma_urad", 6.0) * 1e-6;
    p.dark_current_a = detail::get_or(j, "dark_current_na", 1.0) * 1e-9;
    p.noise_temperature_k = detail::get_or(j, "noise_temp_k", 500.0);
    p.load_resistance_ohm = detail::get_or(j, "load_ohm", 1000.0);
    p.set_snr_threshold_db(detail::get_or(j, "snr_threshold_db", 20.0));
    return p;
}

inline ExperimentConfig experiment_from_json(const json& j) {
    ExperimentConfig cfg;
    try {
        if (j.contains("constellation")) cfg.constellation = constellation_from_json(j.at("constellation"));
        if (j.contains("link")) {
            cfg.link = link_from_json(j.at("link"));
            const auto& lj = j.at("link");
            if (lj.contains("success_prob_override") && !lj.at("success_prob_override").is_null())
                cfg.link_success_override = lj.at("success_prob_override").get<double>();
        }

        if (j.contains("training")) {
            const auto& t = j.at("training");
            const std::string task = detail::get_or<std::string>(t, "task", "least_squares");
            if (task == "least_squares") {
                cfg.task_kind = TaskKind::LeastSquares;
            } else if (task == "logistic") {
                cfg.task_kind = TaskKind::Logistic;
            } else {
                throw ConfigError("unknown task: " + task);
            }
            cfg.n_samples = detail::get_or(t, "n_samples", 1024);
            cfg.dim = detail::get_or(t, "dim", 16);
            cfg.noise = detail::get_or(t, "noise", 0.1);
            const std::string part = detail::get_or<std::string>(t, "partition", "iid");
            if (part == "iid") {
                cfg.partition = PartitionMode::Iid;
            } else if (part == "dirichlet") {
                cfg.partition = PartitionMode::Dirichlet;
            } else {
                throw ConfigError("unknown partition: " + part);
            }
            cfg.alpha = detail::get_or(t, "alpha", 0.6);
            cfg.training.learning_rate = detail::get_or(t, "lr", 0.1);
            cfg.training.lr_decay = detail::get_or(t, "lr_decay", 0.998);
            cfg.training.local_epochs = detail::get_or(t, "local_epochs", 5);
            cfg.training.batch_size = detail::get_or(t, "batch_size", 64);
            cfg.training.rounds = detail::get_or(t, "rounds", 300);
            cfg.training.sam_radius = detail::get_or(t, "sam_rho", 0.01);
            if (t.contains("seed")) cfg.data_seed = t.at("seed").get<std::uint64_t>();
        }

        if (j.contains("consensus")) {
            const auto& c = j.at("consensus");
            cfg.consensus.gossip_rounds = detail::get_or(c, "gossip_rounds", 1);
            cfg.consensus.packet_len = detail::get_or(c, "packet_len_params", 150000);
            const std::string links = detail::get_or<std::string>(c, "links", "reliable");
            if (links == "physical") {
                cfg.consensus.links = LinkSampler::Physical;
            } else if (links == "pinned") {
                cfg.consensus.links = LinkSampler::Pinned;
            } else if (links == "reliable") {
                cfg.consensus.links = LinkSampler::Reliable;
            } else {
                throw ConfigError("unknown link sampler: " + links);
            }
            cfg.consensus.pinned_p = detail::get_or(c, "pinned_p", 1.0);
        }

        if (j.contains("baseline")) {
            const auto& b = j.at("baseline");
            cfg.baseline.algorithm =
                algorithm_from_string(detail::get_or<std::string>(b, "algorithm", "dfedsat"));
            cfg.baseline.max_retransmissions = detail::get_or(b, "max_retransmissions", 3);
        }

        cfg.seed = detail::get_or<std::uint64_t>(j, "seed", 1);
        if (!j.contains("training") || !j.at("training").contains("seed")) cfg.data_seed = cfg.seed;
        cfg.output_path = detail::get_or<std::string>(j, "output_path", "");
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid JSON in ") + path + ": " + e.what());
    }
    return experiment_from_json(j);
}

inline SweepGrid sweep_grid_from_json(const json& j) {
    SweepGrid g;
    try {
        if (j.contains("C")) g.gossip_rounds = j.at("C").get<std::vector<int>>();
        if (j.contains("M")) g.planes = j.at("M").get<std::vector<int>>();
        if (j.contains("p")) g.pinned_p = j.at("p").get<std::vector<double>>();
        if (j.contains("tx_power_dbm"))
            g.tx_power_dbm = j.at("tx_power_dbm").get<std::vector<double>>();
        if (j.contains("algorithm"))
            for (const auto& name : j.at("algorithm"))
                g.algorithms.push_back(algorithm_from_string(name.get<std::string>()));
        if (j.contains("alpha")) g.alphas = j.at("alpha").get<std::vector<double>>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("grid parse error: ") + e.what());
    }
    return g;
}

inline SweepGrid load_sweep_grid(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open grid file: " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid JSON in ") + path + ": " + e.what());
    }
    return sweep_grid_from_json(j);
}

}  // namespace dfedsat
