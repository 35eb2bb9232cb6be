#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "presgan/evaluator.hpp"
#include "presgan/io.hpp"
#include "presgan/mixture.hpp"
#include "presgan/trainer.hpp"

namespace presgan {

struct ModelConfig {
    std::size_t latent_dim = 10;
    std::vector<std::size_t> gen_hidden = {128, 128, 128};
    std::vector<std::size_t> disc_hidden = {128, 128, 128};
    Activation gen_hidden_activation = Activation::tanh;
    Activation gen_output_activation = Activation::identity;
    Activation disc_hidden_activation = Activation::tanh;
    double log_variance_init = 0.0;

    void validate() const {
        if (latent_dim == 0) throw config_error("model: latent_dim must be >= 1");
        if (gen_hidden.empty() || disc_hidden.empty())
            throw config_error("model: hidden layer lists must be non-empty");
    }
};

struct EvalConfig {
    std::size_t importance_samples = 2000;
    std::size_t map_steps = 200;
    double map_lr = 0.01;
    double overdispersion = 1.2;
    std::size_t encoder_epochs = 50;
    double encoder_lr = 1e-3;
    std::vector<std::size_t> encoder_hidden = {128, 128};
    std::size_t num_eval_points = 100;
    std::size_t metric_samples = 5000;
    LikelihoodSpec likelihood;

    void validate() const {
        if (importance_samples == 0) throw config_error("eval: importance_samples must be >= 1");
        if (!(map_lr > 0.0)) throw config_error("eval: map_lr must be > 0");
        if (!(overdispersion >= 1.0)) throw config_error("eval: overdispersion must be >= 1");
        if (num_eval_points == 0 || metric_samples == 0)
            throw config_error("eval: point counts must be >= 1");
    }
};

struct OutputConfig {
    std::string dir = ".";
    std::size_t checkpoint_every = 0;  // 0: only the final checkpoint
};

struct RunConfig {
    MixtureSpec dataset;
    std::size_t dataset_n = 5000;
    ModelConfig model;
    TrainConfig train;
    EvalConfig eval;
    OutputConfig output;

    void validate() const {
        dataset.validate();
        if (dataset_n == 0) throw config_error("dataset: n must be >= 1");
        model.validate();
        train.validate();
        eval.validate();
    }
};

namespace detail {

template <typename T>
T require_key(const nlohmann::json& j, const std::string& section, const char* key) {
    if (!j.contains(key))
        throw config_error("config: missing key '" + section + "." + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw config_error("config: bad value for '" + section + "." + key + "'");
    }
}

template <typename T>
T optional_key(const nlohmann::json& j, const std::string& section, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw config_error("config: bad value for '" + section + "." + key + "'");
    }
}

inline const nlohmann::json& require_section(const nlohmann::json& j, const char* name) {
    if (!j.contains(name) || !j.at(name).is_object())
        throw config_error(std::string("config: missing section '") + name + "'");
    return j.at(name);
}

}  // namespace detail

// Every hyperparameter that changes the learning problem must be written out
// explicitly; only plumbing knobs carry defaults (documented field by field).
inline RunConfig run_config_from_json(const nlohmann::json& j) {
    using detail::optional_key;
    using detail::require_key;
    RunConfig cfg;

    const nlohmann::json& ds = detail::require_section(j, "dataset");
    cfg.dataset.K = require_key<std::size_t>(ds, "dataset", "K");
    cfg.dataset.radius = require_key<double>(ds, "dataset", "radius");
    cfg.dataset.component_std = require_key<double>(ds, "dataset", "component_std");
    cfg.dataset.seed = require_key<std::uint64_t>(ds, "dataset", "seed");
    cfg.dataset_n = require_key<std::size_t>(ds, "dataset", "n");
    bool has_props = ds.contains("proportions"), has_level = ds.contains("imbalance_level");
    if (has_props == has_level)
        throw config_error("config: dataset needs exactly one of 'proportions' or 'imbalance_level'");
    if (has_level)
        cfg.dataset.proportions =
            imbalanced_proportions(require_key<int>(ds, "dataset", "imbalance_level"), cfg.dataset.K);
    else if (ds.at("proportions").is_string() && ds.at("proportions").get<std::string>() == "uniform")
        cfg.dataset.proportions = MixtureSpec::uniform_proportions(cfg.dataset.K);
    else
        cfg.dataset.proportions = require_key<std::vector<double>>(ds, "dataset", "proportions");

    const nlohmann::json& mo = detail::require_section(j, "model");
    cfg.model.latent_dim = require_key<std::size_t>(mo, "model", "latent_dim");
    cfg.model.gen_hidden = require_key<std::vector<std::size_t>>(mo, "model", "gen_hidden");
    cfg.model.disc_hidden = require_key<std::vector<std::size_t>>(mo, "model", "disc_hidden");
    cfg.model.log_variance_init = require_key<double>(mo, "model", "log_variance_init");
    cfg.model.gen_hidden_activation =
        activation_from_name(optional_key<std::string>(mo, "model", "gen_hidden_activation", "tanh"));
    cfg.model.gen_output_activation = activation_from_name(
        optional_key<std::string>(mo, "model", "gen_output_activation", "identity"));
    cfg.model.disc_hidden_activation =
        activation_from_name(optional_key<std::string>(mo, "model", "disc_hidden_activation", "tanh"));

    const nlohmann::json& tr = detail::require_section(j, "train");
    cfg.train.lambda = require_key<double>(tr, "train", "lambda");
    cfg.train.bounds.sigma_low = require_key<double>(tr, "train", "sigma_low");
    cfg.train.bounds.sigma_high = require_key<double>(tr, "train", "sigma_high");
    cfg.train.num_posterior_samples = require_key<std::size_t>(tr, "train", "num_posterior_samples");
    cfg.train.burn_in = require_key<std::size_t>(tr, "train", "burn_in");
    cfg.train.leapfrog_steps = require_key<std::size_t>(tr, "train", "leapfrog_steps");
    cfg.train.hmc_step_size = require_key<double>(tr, "train", "hmc_step_size");
    cfg.train.target_accept = optional_key<double>(tr, "train", "target_accept", 0.67);
    cfg.train.hmc_adapt = optional_key<bool>(tr, "train", "hmc_adapt", true);
    cfg.train.lr_gen = require_key<double>(tr, "train", "lr_gen");
    cfg.train.lr_disc = require_key<double>(tr, "train", "lr_disc");
    cfg.train.lr_sigma = require_key<double>(tr, "train", "lr_sigma");
    cfg.train.adam_beta1 = require_key<double>(tr, "train", "adam_beta1");
    cfg.train.adam_beta2 = require_key<double>(tr, "train", "adam_beta2");
    cfg.train.adam_eps = optional_key<double>(tr, "train", "adam_eps", 1e-8);
    cfg.train.batch_size = require_key<std::size_t>(tr, "train", "batch_size");
    cfg.train.epochs = require_key<std::size_t>(tr, "train", "epochs");
    cfg.train.disc_steps_per_gen_step =
        optional_key<std::size_t>(tr, "train", "disc_steps_per_gen_step", 1);
    cfg.train.seed = require_key<std::uint64_t>(tr, "train", "seed");
    cfg.train.non_saturating = optional_key<bool>(tr, "train", "non_saturating", false);
    cfg.train.entropy_resample_x = optional_key<bool>(tr, "train", "entropy_resample_x", false);

    if (j.contains("eval")) {
        const nlohmann::json& ev = j.at("eval");
        cfg.eval.importance_samples =
            optional_key<std::size_t>(ev, "eval", "importance_samples", cfg.eval.importance_samples);
        cfg.eval.map_steps = optional_key<std::size_t>(ev, "eval", "map_steps", cfg.eval.map_steps);
        cfg.eval.map_lr = optional_key<double>(ev, "eval", "map_lr", cfg.eval.map_lr);
        cfg.eval.overdispersion =
            optional_key<double>(ev, "eval", "overdispersion", cfg.eval.overdispersion);
        cfg.eval.encoder_epochs =
            optional_key<std::size_t>(ev, "eval", "encoder_epochs", cfg.eval.encoder_epochs);
        cfg.eval.encoder_lr = optional_key<double>(ev, "eval", "encoder_lr", cfg.eval.encoder_lr);
        cfg.eval.encoder_hidden =
            optional_key<std::vector<std::size_t>>(ev, "eval", "encoder_hidden", cfg.eval.encoder_hidden);
        cfg.eval.num_eval_points =
            optional_key<std::size_t>(ev, "eval", "num_eval_points", cfg.eval.num_eval_points);
        cfg.eval.metric_samples =
            optional_key<std::size_t>(ev, "eval", "metric_samples", cfg.eval.metric_samples);
        std::string lik = optional_key<std::string>(ev, "eval", "likelihood", "gaussian");
        if (lik == "gaussian")
            cfg.eval.likelihood.kind = LikelihoodSpec::Kind::gaussian;
        else if (lik == "truncated_gaussian")
            cfg.eval.likelihood.kind = LikelihoodSpec::Kind::truncated_gaussian;
        else
            throw config_error("config: eval.likelihood must be gaussian or truncated_gaussian");
        cfg.eval.likelihood.lo = optional_key<double>(ev, "eval", "truncate_lo", -1.0);
        cfg.eval.likelihood.hi = optional_key<double>(ev, "eval", "truncate_hi", 1.0);
    }

    if (j.contains("output")) {
        const nlohmann::json& ou = j.at("output");
        cfg.output.dir = optional_key<std::string>(ou, "output", "dir", cfg.output.dir);
        cfg.output.checkpoint_every =
            optional_key<std::size_t>(ou, "output", "checkpoint_every", cfg.output.checkpoint_every);
    }

    cfg.validate();
    return cfg;
}

inline nlohmann::json run_config_to_json(const RunConfig& cfg) {
    nlohmann::json j;
    j["dataset"] = {{"K", cfg.dataset.K},
                    {"radius", cfg.dataset.radius},
                    {"component_std", cfg.dataset.component_std},
                    {"proportions", cfg.dataset.proportions},
                    {"seed", cfg.dataset.seed},
                    {"n", cfg.dataset_n}};
    j["model"] = {{"latent_dim", cfg.model.latent_dim},
                  {"gen_hidden", cfg.model.gen_hidden},
                  {"disc_hidden", cfg.model.disc_hidden},
                  {"gen_hidden_activation", activation_name(cfg.model.gen_hidden_activation)},
                  {"gen_output_activation", activation_name(cfg.model.gen_output_activation)},
                  {"disc_hidden_activation", activation_name(cfg.model.disc_hidden_activation)},
                  {"log_variance_init", cfg.model.log_variance_init}};
    j["train"] = {{"lambda", cfg.train.lambda},
                  {"sigma_low", cfg.train.bounds.sigma_low},
                  {"sigma_high", cfg.train.bounds.sigma_high},
                  {"num_posterior_samples", cfg.train.num_posterior_samples},
                  {"burn_in", cfg.train.burn_in},
                  {"leapfrog_steps", cfg.train.leapfrog_steps},
                  {"hmc_step_size", cfg.train.hmc_step_size},
                  {"target_accept", cfg.train.target_accept},
                  {"hmc_adapt", cfg.train.hmc_adapt},
                  {"lr_gen", cfg.train.lr_gen},
                  {"lr_disc", cfg.train.lr_disc},
                  {"lr_sigma", cfg.train.lr_sigma},
                  {"adam_beta1", cfg.train.adam_beta1},
                  {"adam_beta2", cfg.train.adam_beta2},
                  {"adam_eps", cfg.train.adam_eps},
                  {"batch_size", cfg.train.batch_size},
                  {"epochs", cfg.train.epochs},
                  {"disc_steps_per_gen_step", cfg.train.disc_steps_per_gen_step},
                  {"seed", cfg.train.seed},
                  {"non_saturating", cfg.train.non_saturating},
                  {"entropy_resample_x", cfg.train.entropy_resample_x}};
    j["eval"] = {{"importance_samples", cfg.eval.importance_samples},
                 {"map_steps", cfg.eval.map_steps},
                 {"map_lr", cfg.eval.map_lr},
                 {"overdispersion", cfg.eval.overdispersion},
                 {"encoder_epochs", cfg.eval.encoder_epochs},
                 {"encoder_lr", cfg.eval.encoder_lr},
                 {"encoder_hidden", cfg.eval.encoder_hidden},
                 {"num_eval_points", cfg.eval.num_eval_points},
                 {"metric_samples", cfg.eval.metric_samples},
                 {"likelihood", cfg.eval.likelihood.kind == LikelihoodSpec::Kind::gaussian
                                    ? "gaussian"
                                    : "truncated_gaussian"},
                 {"truncate_lo", cfg.eval.likelihood.lo},
                 {"truncate_hi", cfg.eval.likelihood.hi}};
    j["output"] = {{"dir", cfg.output.dir}, {"checkpoint_every", cfg.output.checkpoint_every}};
    return j;
}

inline RunConfig load_run_config(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw config_error("config '" + path + "': " + e.what());  // includes the byte offset
    }
    return run_config_from_json(j);
}

}  // namespace presgan
