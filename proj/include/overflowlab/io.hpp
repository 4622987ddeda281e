#pragma once

#include <fstream>
#include <string>

#include <json.hpp>

#include "overflowlab/errors.hpp"
#include "overflowlab/network.hpp"

namespace overflowlab {

// Reads a network description from a UTF-8 JSON file:
//   { "lambda": [...], "mu": [...], "routing": [[...], ...], "name": "..." }
// d is inferred from the array lengths; every mismatch is a ParseError that
// names the offending file.
inline NetworkSpec load_network(const std::string& path, std::string* name = nullptr) {
    std::ifstream in(path);
    require(in.good(), Errc::ParseError, path + ": cannot open file");

    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::ParseError, path + ": " + e.what());
    }

    auto bad = [&](const std::string& what) -> void { fail(Errc::ParseError, path + ": " + what); };
    if (!doc.is_object()) bad("top level must be a JSON object");
    for (const char* key : {"lambda", "mu", "routing"})
        if (!doc.contains(key)) bad(std::string("missing key \"") + key + "\"");

    auto read_rates = [&](const char* key) {
        const auto& arr = doc.at(key);
        if (!arr.is_array() || arr.empty()) bad(std::string("\"") + key + "\" must be a non-empty array");
        std::vector<double> out;
        for (const auto& e : arr) {
            if (!e.is_number()) bad(std::string("\"") + key + "\" entries must be numbers");
            out.push_back(e.get<double>());
        }
        return out;
    };

    NetworkSpec spec;
    spec.lambda = read_rates("lambda");
    spec.mu = read_rates("mu");
    const std::size_t d = spec.lambda.size();
    if (spec.mu.size() != d) bad("\"mu\" length differs from \"lambda\"");

    const auto& routing = doc.at("routing");
    if (!routing.is_array() || routing.size() != d)
        bad("\"routing\" must be an array of d rows");
    for (const auto& row : routing) {
        if (!row.is_array() || row.size() != d) bad("routing rows must each have d entries");
        std::vector<double> r;
        for (const auto& e : row) {
            if (!e.is_number()) bad("routing entries must be numbers");
            r.push_back(e.get<double>());
        }
        spec.routing.push_back(std::move(r));
    }

    if (name != nullptr) {
        *name = doc.value("name", std::string());
    }
    return spec;
}

}  // namespace overflowlab
