#pragma once

#include <string>
#include <utility>
#include <vector>

#include "presgan/errors.hpp"
#include "presgan/tensor.hpp"

namespace presgan {

struct ParamSegment {
    std::string name;
    Tensor value;
};

// Ordered collection of named tensors (network weights, biases). Order is
// part of the contract: flatten()/assign_flat() and the optimizer walk
// segments in insertion order.
class ParamVector {
public:
    void add(std::string name, Tensor value) {
        if (has(name)) throw config_error("param vector: duplicate segment '" + name + "'");
        segments_.push_back({std::move(name), std::move(value)});
    }

    bool has(const std::string& name) const {
        for (const auto& s : segments_)
            if (s.name == name) return true;
        return false;
    }

    Tensor& at(const std::string& name) {
        for (auto& s : segments_)
            if (s.name == name) return s.value;
        throw config_error("param vector: no segment '" + name + "'");
    }

    const Tensor& at(const std::string& name) const {
        for (const auto& s : segments_)
            if (s.name == name) return s.value;
        throw config_error("param vector: no segment '" + name + "'");
    }

    std::vector<ParamSegment>& segments() { return segments_; }
    const std::vector<ParamSegment>& segments() const { return segments_; }

    std::size_t segment_count() const { return segments_.size(); }

    std::size_t size() const {
        std::size_t n = 0;
        for (const auto& s : segments_) n += s.value.size();
        return n;
    }

    std::vector<double> flatten() const {
        std::vector<double> out;
        out.reserve(size());
        for (const auto& s : segments_)
            out.insert(out.end(), s.value.values().begin(), s.value.values().end());
        return out;
    }

    void assign_flat(const std::vector<double>& flat) {
        if (flat.size() != size())
            throw config_error("param vector: flat size " + std::to_string(flat.size()) +
                               " != " + std::to_string(size()));
        std::size_t off = 0;
        for (auto& s : segments_) {
            for (std::size_t i = 0; i < s.value.size(); ++i) s.value[i] = flat[off + i];
            off += s.value.size();
        }
    }

    static ParamVector zeros_like(const ParamVector& other) {
        ParamVector out;
        for (const auto& s : other.segments()) out.add(s.name, Tensor(s.value.shape()));
        return out;
    }

    bool same_layout(const ParamVector& other) const {
        if (segments_.size() != other.segments_.size()) return false;
        for (std::size_t i = 0; i < segments_.size(); ++i)
            if (segments_[i].name != other.segments_[i].name ||
                segments_[i].value.shape() != other.segments_[i].value.shape())
                return false;
        return true;
    }

    void ensure_same_layout(const ParamVector& other, const char* what) const {
        if (!same_layout(other)) throw config_error(std::string(what) + ": segment layout mismatch");
    }

    // this += a * other
    void axpy(double a, const ParamVector& other) {
        ensure_same_layout(other, "param axpy");
        for (std::size_t i = 0; i < segments_.size(); ++i) {
            Tensor& dst = segments_[i].value;
            const Tensor& src = other.segments_[i].value;
            for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += a * src[j];
        }
    }

    void scale(double a) {
        for (auto& s : segments_)
            for (std::size_t j = 0; j < s.value.size(); ++j) s.value[j] *= a;
    }

    double squared_norm() const {
        double acc = 0.0;
        for (const auto& s : segments_) acc += s.value.squared_norm();
        return acc;
    }

    bool all_finite() const {
        for (const auto& s : segments_)
            if (!s.value.all_finite()) return false;
        return true;
    }

    void ensure_finite(const char* what) const {
        for (const auto& s : segments_)
            if (!s.value.all_finite())
                throw numeric_error(std::string(what) + ": non-finite value in segment '" + s.name + "'");
    }

private:
    std::vector<ParamSegment> segments_;
};

}  // namespace presgan
