#pragma once

// Internal helpers shared by the checkpoint writers. JSON is used as the
// container; nlohmann emits shortest-round-trip doubles, so parameter values
// survive save/load bit-exactly.

#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "userhan/corpus.hpp"
#include "userhan/tensor.hpp"

namespace userhan::detail {

inline nlohmann::json tensor_to_json(const Tensor& t) {
    nlohmann::json j;
    j["shape"] = t.shape();
    j["data"] = t.data();
    return j;
}

inline Tensor tensor_from_json(const nlohmann::json& j, bool requires_grad = true) {
    return Tensor::from(j.at("shape").get<std::vector<int>>(),
                        j.at("data").get<std::vector<double>>(), requires_grad);
}

inline nlohmann::json vocab_to_json(const Vocabulary& v) {
    nlohmann::json j;
    j["tokens"] = v.id_to_token;
    j["min_freq"] = v.min_freq;
    return j;
}

inline Vocabulary vocab_from_json(const nlohmann::json& j) {
    Vocabulary v;
    v.id_to_token = j.at("tokens").get<std::vector<std::string>>();
    v.min_freq = j.at("min_freq").get<int>();
    for (std::size_t i = 0; i < v.id_to_token.size(); ++i)
        v.token_to_id[v.id_to_token[i]] = static_cast<int>(i);
    return v;
}

inline nlohmann::json read_checkpoint_file(const std::string& path, const std::string& kind) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    nlohmann::json j = nlohmann::json::parse(in);
    if (j.at("kind").get<std::string>() != kind)
        throw std::runtime_error("checkpoint " + path + " has kind '" +
                                 j.at("kind").get<std::string>() + "', expected '" + kind + "'");
    return j;
}

inline void write_checkpoint_file(const nlohmann::json& j, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    out << j.dump() << '\n';
}

}  // namespace userhan::detail
