#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "presgan/io.hpp"
#include "presgan/models.hpp"
#include "presgan/trainer.hpp"

namespace presgan {

inline constexpr const char* kCheckpointFormat = "presgan-checkpoint-v1";

struct Checkpoint {
    GeneratorParams gen;
    DiscriminatorParams disc;
    std::optional<EncoderParams> encoder;
    TrainState state;
    nlohmann::json config;  // the run configuration this checkpoint came from
};

namespace detail {

inline nlohmann::json spec_to_json(const MlpSpec& spec) {
    return {{"layers", spec.layers},
            {"hidden", activation_name(spec.hidden)},
            {"output", activation_name(spec.output)},
            {"leaky_slope", spec.leaky_slope}};
}

inline MlpSpec spec_from_json(const nlohmann::json& j) {
    MlpSpec spec;
    spec.layers = j.at("layers").get<std::vector<std::size_t>>();
    spec.hidden = activation_from_name(j.at("hidden").get<std::string>());
    spec.output = activation_from_name(j.at("output").get<std::string>());
    spec.leaky_slope = j.at("leaky_slope").get<double>();
    spec.validate();
    return spec;
}

inline nlohmann::json params_to_json(const ParamVector& params) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& seg : params.segments())
        j[seg.name] = {{"shape", seg.value.shape()}, {"data", seg.value.values()}};
    return j;
}

// Segments are rebuilt in the spec's canonical order; a missing name is
// reported explicitly.
inline ParamVector params_from_json(const nlohmann::json& j, const MlpSpec& spec, const char* what) {
    ParamVector params;
    for (std::size_t l = 0; l < spec.layer_count(); ++l)
        for (const char* prefix : {"W", "b"}) {
            std::string name = prefix + std::to_string(l);
            if (!j.contains(name))
                throw config_error(std::string(what) + ": checkpoint is missing segment '" + name + "'");
            const nlohmann::json& seg = j.at(name);
            Tensor t = Tensor::from(seg.at("shape").get<std::vector<std::size_t>>(),
                                    seg.at("data").get<std::vector<double>>());
            params.add(name, std::move(t));
        }
    validate_mlp_params(spec, params, what);
    return params;
}

inline nlohmann::json adam_to_json(const AdamState& s) {
    return {{"m", s.m}, {"v", s.v}, {"t", s.t}};
}

inline AdamState adam_from_json(const nlohmann::json& j) {
    AdamState s;
    s.m = j.at("m").get<std::vector<double>>();
    s.v = j.at("v").get<std::vector<double>>();
    s.t = j.at("t").get<std::size_t>();
    return s;
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    nlohmann::json j;
    j["format"] = kCheckpointFormat;
    j["generator"] = {{"spec", detail::spec_to_json(ckpt.gen.spec)},
                      {"eta", detail::params_to_json(ckpt.gen.eta)},
                      {"log_sigma", ckpt.gen.log_sigma.values()}};
    j["discriminator"] = {{"spec", detail::spec_to_json(ckpt.disc.spec)},
                          {"phi", detail::params_to_json(ckpt.disc.phi)}};
    if (ckpt.encoder)
        j["encoder"] = {{"spec", detail::spec_to_json(ckpt.encoder->spec)},
                        {"gamma", detail::params_to_json(ckpt.encoder->gamma)}};
    j["train_state"] = {{"next_epoch", ckpt.state.next_epoch},
                        {"hmc_step_size", ckpt.state.hmc_step_size},
                        {"opt_phi", detail::adam_to_json(ckpt.state.opt_phi)},
                        {"opt_eta", detail::adam_to_json(ckpt.state.opt_eta)},
                        {"opt_log_sigma", detail::adam_to_json(ckpt.state.opt_log_sigma)}};
    j["config"] = ckpt.config;
    atomic_write_file(path, j.dump(2) + "\n");
}

inline Checkpoint load_checkpoint(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw io_error("checkpoint '" + path + "': " + e.what());  // includes the byte offset
    }
    try {
        if (j.at("format").get<std::string>() != kCheckpointFormat)
            throw config_error("checkpoint '" + path + "': unknown format tag");
        Checkpoint out;
        out.gen.spec = detail::spec_from_json(j.at("generator").at("spec"));
        out.gen.eta = detail::params_from_json(j.at("generator").at("eta"), out.gen.spec, "generator");
        out.gen.log_sigma = Tensor::from({out.gen.spec.output_dim()},
                                         j.at("generator").at("log_sigma").get<std::vector<double>>());
        validate_generator(out.gen, "checkpoint");
        out.disc.spec = detail::spec_from_json(j.at("discriminator").at("spec"));
        out.disc.phi =
            detail::params_from_json(j.at("discriminator").at("phi"), out.disc.spec, "discriminator");
        if (j.contains("encoder")) {
            EncoderParams enc;
            enc.spec = detail::spec_from_json(j.at("encoder").at("spec"));
            enc.gamma = detail::params_from_json(j.at("encoder").at("gamma"), enc.spec, "encoder");
            out.encoder = std::move(enc);
        }
        const nlohmann::json& ts = j.at("train_state");
        out.state.next_epoch = ts.at("next_epoch").get<std::size_t>();
        out.state.hmc_step_size = ts.at("hmc_step_size").get<double>();
        out.state.opt_phi = detail::adam_from_json(ts.at("opt_phi"));
        out.state.opt_eta = detail::adam_from_json(ts.at("opt_eta"));
        out.state.opt_log_sigma = detail::adam_from_json(ts.at("opt_log_sigma"));
        out.config = j.value("config", nlohmann::json::object());
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw config_error("checkpoint '" + path + "': " + e.what());
    }
}

}  // namespace presgan
