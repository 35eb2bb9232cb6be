#pragma once

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI/CLI.hpp>

#include "presgan/checkpoint.hpp"
#include "presgan/config.hpp"
#include "presgan/evaluator.hpp"
#include "presgan/io.hpp"
#include "presgan/mixture.hpp"
#include "presgan/trainer.hpp"

namespace presgan::cli {

namespace detail {

struct Options {
    std::string config_path;
    std::string checkpoint_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::size_t sample_n = 0;
};

// Checkpoint-consuming commands may run without --config, in which case the
// configuration embedded in the checkpoint is used.
inline RunConfig resolve_config(const Options& opt, const Checkpoint* ckpt) {
    RunConfig cfg;
    if (!opt.config_path.empty()) {
        cfg = load_run_config(opt.config_path);
    } else if (ckpt) {
        cfg = run_config_from_json(ckpt->config);
    } else {
        throw config_error("cli: --config is required for this command");
    }
    if (opt.seed) cfg.train.seed = *opt.seed;
    if (!opt.out_dir.empty()) cfg.output.dir = opt.out_dir;
    return cfg;
}

inline std::string join_path(const std::string& dir, const std::string& name) {
    if (dir.empty() || dir == ".") return name;
    return dir.back() == '/' ? dir + name : dir + "/" + name;
}

inline Dataset training_dataset(const RunConfig& cfg) {
    RngStream rng = RngStream::derive(cfg.dataset.seed, {stream_tag::data, 0});
    return sample_mixture(cfg.dataset, cfg.dataset_n, rng);
}

inline Tensor generate_points(const GeneratorParams& gen, std::size_t n, RngStream& rng) {
    Tensor z = rng.normal_tensor({n, gen.latent_dim()});
    Tensor eps = rng.normal_tensor({n, gen.data_dim()});
    return reparam_sample(gen, z, eps);
}

inline void build_models(const RunConfig& cfg, GeneratorParams& gen, DiscriminatorParams& disc) {
    RngStream gen_rng = RngStream::derive(cfg.train.seed, {stream_tag::model_init, 0});
    RngStream disc_rng = RngStream::derive(cfg.train.seed, {stream_tag::model_init, 1});
    gen = make_generator(cfg.model.latent_dim, 2, cfg.model.gen_hidden,
                         cfg.model.gen_hidden_activation, cfg.model.gen_output_activation,
                         cfg.model.log_variance_init, gen_rng);
    disc = make_discriminator(2, cfg.model.disc_hidden, cfg.model.disc_hidden_activation, disc_rng);
}

inline void write_metrics_json(const std::string& path, const ModeAssignment& assign,
                               double kl_gr, double kl_rg, std::size_t n) {
    nlohmann::json j;
    j["modes_captured"] = assign.captured_count();
    std::vector<int> mask(assign.captured.begin(), assign.captured.end());
    j["captured_mask"] = mask;
    j["label_kl_gen_vs_real"] = kl_gr;
    j["label_kl_real_vs_gen"] = kl_rg;
    j["num_samples"] = n;
    atomic_write_file(path, j.dump(2) + "\n");
}

inline int cmd_train(const Options& opt) {
    std::optional<Checkpoint> resume;
    if (!opt.checkpoint_path.empty()) resume = load_checkpoint(opt.checkpoint_path);
    RunConfig cfg = resolve_config(opt, resume ? &*resume : nullptr);

    Dataset data = training_dataset(cfg);
    GeneratorParams gen;
    DiscriminatorParams disc;
    TrainState state;
    if (resume) {
        gen = std::move(resume->gen);
        disc = std::move(resume->disc);
        state = std::move(resume->state);
    } else {
        build_models(cfg, gen, disc);
    }

    nlohmann::json cfg_json = run_config_to_json(cfg);
    std::vector<EpochStats> log;
    auto save = [&](const std::string& name) {
        save_checkpoint(join_path(cfg.output.dir, name),
                        Checkpoint{gen, disc, std::nullopt, state, cfg_json});
    };
    auto flush_log = [&] { write_epoch_log_csv(join_path(cfg.output.dir, "epoch_log.csv"), log); };

    const std::size_t print_every = std::max<std::size_t>(1, cfg.train.epochs / 20);
    TrainCallbacks callbacks;
    callbacks.on_warning = [](const std::string& msg) { std::cerr << "warning: " << msg << "\n"; };
    callbacks.on_epoch = [&](const EpochStats& s) {
        log.push_back(s);
        if (s.epoch % print_every == 0 || s.epoch + 1 == cfg.train.epochs)
            std::printf("epoch %zu/%zu  disc %.4f  gen %.4f  accept %.3f  sigma [%.4f, %.4f]\n",
                        s.epoch + 1, cfg.train.epochs, s.disc_loss, s.gen_adv_loss, s.accept_rate,
                        s.sigma_min, s.sigma_max);
        if (cfg.output.checkpoint_every > 0 && (s.epoch + 1) % cfg.output.checkpoint_every == 0 &&
            s.epoch + 1 < cfg.train.epochs) {
            save("checkpoint_" + std::to_string(s.epoch + 1) + ".json");
            flush_log();
        }
    };

    try {
        train(data.points, gen, disc, cfg.train, state, callbacks);
    } catch (const numeric_error& e) {
        flush_log();
        save("checkpoint_diverged.json");
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 2;
    }

    flush_log();
    save("checkpoint_final.json");
    RngStream plot_rng = RngStream::derive(cfg.train.seed, {stream_tag::metric_samples, 0});
    Tensor fake = generate_points(gen, cfg.eval.metric_samples, plot_rng);
    write_scatter_svg(join_path(cfg.output.dir, "scatter_final.svg"), data.points, fake);
    return 0;
}

inline int cmd_eval_ll(const Options& opt) {
    if (opt.checkpoint_path.empty()) throw config_error("cli: eval-ll requires --checkpoint");
    Checkpoint ckpt = load_checkpoint(opt.checkpoint_path);
    RunConfig cfg = resolve_config(opt, &ckpt);

    Dataset data = training_dataset(cfg);
    RngStream held_rng = RngStream::derive(cfg.dataset.seed, {stream_tag::data, 1});
    Dataset held_out = sample_mixture(cfg.dataset, cfg.eval.num_eval_points, held_rng);

    EncoderFitOptions enc_opts;
    enc_opts.epochs = cfg.eval.encoder_epochs;
    enc_opts.lr = cfg.eval.encoder_lr;
    enc_opts.batch_size = cfg.train.batch_size;
    enc_opts.hidden = cfg.eval.encoder_hidden;
    enc_opts.seed = cfg.train.seed;
    EncoderParams enc = fit_encoder(ckpt.gen, data.points, enc_opts);

    EvalReport report;
    report.num_importance_samples = cfg.eval.importance_samples;
    for (std::size_t i = 0; i < held_out.points.rows(); ++i) {
        Tensor x_star = Tensor::vector(2);
        x_star[0] = held_out.points(i, 0);
        x_star[1] = held_out.points(i, 1);
        ProposalParams proposal = map_proposal(ckpt.gen, enc, x_star, cfg.eval.map_steps,
                                               cfg.eval.map_lr, cfg.eval.overdispersion);
        RngStream is_rng = RngStream::derive(cfg.train.seed, {stream_tag::is_draws, i});
        report.instance_loglik.push_back(importance_loglik(
            ckpt.gen, proposal, x_star, cfg.eval.importance_samples, is_rng, cfg.eval.likelihood));
    }
    report.finalize_mean();

    write_eval_report_json(join_path(cfg.output.dir, "eval_report.json"), report);
    write_instance_loglik_csv(join_path(cfg.output.dir, "instance_loglik.csv"),
                              report.instance_loglik);
    std::printf("mean_loglik %.6f over %zu points (S=%zu)\n", report.mean_loglik,
                report.instance_loglik.size(), cfg.eval.importance_samples);
    return 0;
}

inline int cmd_metrics(const Options& opt) {
    if (opt.checkpoint_path.empty()) throw config_error("cli: metrics requires --checkpoint");
    Checkpoint ckpt = load_checkpoint(opt.checkpoint_path);
    RunConfig cfg = resolve_config(opt, &ckpt);

    RngStream gen_rng = RngStream::derive(cfg.train.seed, {stream_tag::metric_samples, 0});
    Tensor fake = detail::generate_points(ckpt.gen, cfg.eval.metric_samples, gen_rng);
    RngStream real_rng = RngStream::derive(cfg.dataset.seed, {stream_tag::data, 2});
    Dataset real = sample_mixture(cfg.dataset, cfg.eval.metric_samples, real_rng);

    Tensor centers = ring_centers(cfg.dataset.K, cfg.dataset.radius);
    ModeAssignment fake_assign = assign_modes(fake, centers, cfg.dataset.component_std);
    ModeAssignment real_assign = assign_modes(real.points, centers, cfg.dataset.component_std);
    double kl_gr = label_kl(fake_assign.soft_probs, real_assign.soft_probs);
    double kl_rg = label_kl(real_assign.soft_probs, fake_assign.soft_probs);

    write_metrics_json(join_path(cfg.output.dir, "metrics.json"), fake_assign, kl_gr, kl_rg,
                       cfg.eval.metric_samples);
    std::printf("modes_captured %d/%zu  label_kl_gen_vs_real %.6f  label_kl_real_vs_gen %.6f\n",
                fake_assign.captured_count(), cfg.dataset.K, kl_gr, kl_rg);
    return 0;
}

inline int cmd_sample(const Options& opt) {
    if (opt.sample_n == 0) throw config_error("cli: sample requires --n >= 1");
    GeneratorParams gen;
    RunConfig cfg;
    if (!opt.checkpoint_path.empty()) {
        Checkpoint ckpt = load_checkpoint(opt.checkpoint_path);
        cfg = resolve_config(opt, &ckpt);
        gen = std::move(ckpt.gen);
    } else {
        cfg = resolve_config(opt, nullptr);
        DiscriminatorParams unused;
        build_models(cfg, gen, unused);
    }
    RngStream rng = RngStream::derive(cfg.train.seed, {stream_tag::metric_samples, 1});
    Tensor points = generate_points(gen, opt.sample_n, rng);
    write_points_csv(join_path(cfg.output.dir, "samples.csv"), points);
    return 0;
}

inline int cmd_make_data(const Options& opt) {
    RunConfig cfg = resolve_config(opt, nullptr);
    Dataset data = training_dataset(cfg);
    write_dataset_csv(join_path(cfg.output.dir, "dataset.csv"), data);
    write_scatter_svg(join_path(cfg.output.dir, "dataset.svg"), data.points,
                      Tensor::matrix(0, 2));
    return 0;
}

}  // namespace detail

inline int run(int argc, const char* const* argv) {
    CLI::App app{"Entropy-regularized GAN with explicit observation noise (2D mixtures)"};
    app.require_subcommand(1);

    detail::Options opt;
    app.add_option("--config", opt.config_path, "JSON run configuration");
    app.add_option("--checkpoint", opt.checkpoint_path, "checkpoint to load");
    app.add_option("--out", opt.out_dir, "output directory (overrides config)");
    std::uint64_t seed_value = 0;
    CLI::Option* seed_opt =
        app.add_option("--seed", seed_value, "training seed (overrides config)");

    CLI::App* train = app.add_subcommand("train", "run the alternating training loop");
    CLI::App* eval_ll = app.add_subcommand("eval-ll", "importance-sampling log-likelihood");
    CLI::App* metrics = app.add_subcommand("metrics", "modes captured + label KL");
    CLI::App* sample = app.add_subcommand("sample", "emit generated points as CSV");
    CLI::App* make_data = app.add_subcommand("make-data", "write the dataset CSV + scatter");
    sample->add_option("--n", opt.sample_n, "number of points to draw");
    for (CLI::App* sub : {train, eval_ll, metrics, sample, make_data}) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }
    if (seed_opt->count() > 0) opt.seed = seed_value;

    try {
        if (app.got_subcommand(train)) return detail::cmd_train(opt);
        if (app.got_subcommand(eval_ll)) return detail::cmd_eval_ll(opt);
        if (app.got_subcommand(metrics)) return detail::cmd_metrics(opt);
        if (app.got_subcommand(sample)) return detail::cmd_sample(opt);
        if (app.got_subcommand(make_data)) return detail::cmd_make_data(opt);
    } catch (const numeric_error& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

}  // namespace presgan::cli
