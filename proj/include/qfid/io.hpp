// io.hpp
// File formats: density matrices as JSON, (E, G, F) datasets as CSV, and
// JSON / flat-CSV emission of reports and tallies.
//
// State file: {"dim": 4, "matrix": [[[re, im], ...], ...]}. Entries may also
// be plain numbers (imaginary part 0). "dim" is optional.

#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <system_error>

#include "json.hpp"

#include "qfid/errors.hpp"
#include "qfid/measures.hpp"
#include "qfid/meanfit.hpp"
#include "qfid/protocol.hpp"
#include "qfid/states.hpp"

namespace qfid {

using json = nlohmann::json;

// Shortest text that round-trips, at most 17 significant digits, '.' decimal.
inline std::string format_double(double x) {
    if (!std::isfinite(x)) throw ValidationError("refusing to write a non-finite number");
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
    double x = 0.0;
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    const auto res = std::from_chars(s.data(), s.data() + s.size(), x);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(x)) {
        throw ValidationError("malformed number '" + std::string(s) + "'");
    }
    return x;
}

// ---------------------------------------------------------------------------
// States

inline json to_json(const ComplexMatrix& m) {
    json rows = json::array();
    for (std::size_t r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (std::size_t c = 0; c < m.cols(); ++c) row.push_back({m(r, c).real(), m(r, c).imag()});
        rows.push_back(std::move(row));
    }
    return rows;
}

inline json state_to_json(const DensityMatrix& rho) { return {{"dim", rho.dim()}, {"matrix", to_json(rho.matrix())}}; }

namespace detail {

inline cplx parse_entry(const json& v) {
    auto num = [](const json& x) {
        if (!x.is_number()) throw ValidationError("state file: matrix entries must be numbers or [re, im] pairs");
        const double d = x.get<double>();
        if (!std::isfinite(d)) throw ValidationError("state file: non-finite matrix entry");
        return d;
    };
    if (v.is_array()) {
        if (v.size() != 2) throw ValidationError("state file: complex entries must be [re, im] pairs");
        return {num(v[0]), num(v[1])};
    }
    return {num(v), 0.0};
}

}  // namespace detail

inline DensityMatrix state_from_json(const json& j) {
    if (!j.is_object() || !j.contains("matrix")) throw ValidationError("state file: expected an object with \"matrix\"");
    const json& rows = j.at("matrix");
    if (!rows.is_array() || rows.empty()) throw ValidationError("state file: \"matrix\" must be a non-empty array");
    const std::size_t d = rows.size();
    ComplexMatrix m(d, d);
    for (std::size_t r = 0; r < d; ++r) {
        if (!rows[r].is_array() || rows[r].size() != d) throw ValidationError("density matrix must be square");
        for (std::size_t c = 0; c < d; ++c) m(r, c) = detail::parse_entry(rows[r][c]);
    }
    if (j.contains("dim")) {
        if (!j["dim"].is_number_unsigned() || j["dim"].get<std::size_t>() != d) {
            throw ValidationError("state file: \"dim\" does not match the matrix size");
        }
    }
    return DensityMatrix::from_matrix(std::move(m));
}

inline json parse_json_text(std::istream& in, const std::string& what) {
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError(what + ": malformed JSON (" + e.what() + ")");
    }
}

inline DensityMatrix load_state(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open state file '" + path + "'");
    try {
        return state_from_json(parse_json_text(in, path));
    } catch (const ValidationError& e) {
        throw ValidationError(path + ": " + e.what());
    }
}

inline void save_state(const DensityMatrix& rho, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write '" + path + "'");
    out << state_to_json(rho).dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Datasets

inline void write_dataset_csv(const TripleDataset& ds, std::ostream& out) {
    out << "E,G,F\n";
    for (const auto& t : ds.records) out << format_double(t.e) << ',' << format_double(t.g) << ',' << format_double(t.f) << '\n';
}

inline TripleDataset read_dataset_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("dataset CSV is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "E,G,F") throw ValidationError("dataset CSV must start with the header E,G,F");
    TripleDataset ds;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto c1 = line.find(',');
        const auto c2 = c1 == std::string::npos ? c1 : line.find(',', c1 + 1);
        if (c2 == std::string::npos || line.find(',', c2 + 1) != std::string::npos) {
            throw ValidationError("dataset CSV line " + std::to_string(line_no) + ": expected three fields");
        }
        const std::string_view v(line);
        ds.records.push_back({parse_double(v.substr(0, c1)), parse_double(v.substr(c1 + 1, c2 - c1 - 1)),
                              parse_double(v.substr(c2 + 1))});
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Records

inline json to_json(const MeanParams& p) {
    auto num = [](double x) -> json {
        if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
        return x;
    };
    return {{"m", num(p.m)}, {"w", p.w}, {"delta", p.delta}};
}

inline json to_json(const FidelityReport& r) {
    json j{{"dim", r.dim},
           {"overlap", r.overlap},
           {"overlap2", r.overlap2},
           {"purity1", r.purity1},
           {"purity2", r.purity2},
           {"linear_entropy1", r.linear_entropy1},
           {"linear_entropy2", r.linear_entropy2},
           {"subfidelity", r.subfidelity},
           {"superfidelity", r.superfidelity},
           {"fidelity", r.fidelity},
           {"mean_estimate", r.mean_estimate},
           {"mean_params", {{"m", r.mean_params.m}, {"w", r.mean_params.w}}},
           {"bures_distance", r.bures}};
    if (r.fidelity_qubit) j["fidelity_qubit"] = *r.fidelity_qubit;
    return j;
}

inline json to_json(const ProtocolTally& t) {
    json hist = json::object();
    for (const auto& [value, count] : t.histogram()) hist[std::to_string(value)] = count;
    return {{"order", t.order},
            {"strategy", std::string(to_string(t.kind))},
            {"eta", t.eta},
            {"K", t.rounds},
            {"K0", t.k0},
            {"conclusive", t.conclusive},
            {"estimate", t.estimate},
            {"stderr", t.stderr_},
            {"normalization", std::string(to_string(t.normalization))},
            {"histogram", hist},
            {"seed", t.seed},
            {"max_success_probability", strategy_success_probability(t.kind)}};
}

// Flattens nested objects into dotted column names and writes one header
// line plus one value line. Arrays are written as JSON text.
inline void write_flat_csv(const json& j, std::ostream& out) {
    std::vector<std::pair<std::string, std::string>> cols;
    auto walk = [&](auto&& self, const json& node, const std::string& prefix) -> void {
        if (node.is_object()) {
            for (const auto& [k, v] : node.items()) self(self, v, prefix.empty() ? k : prefix + "." + k);
            return;
        }
        std::string text;
        if (node.is_number_float()) {
            text = format_double(node.get<double>());
        } else if (node.is_string()) {
            text = node.get<std::string>();
        } else {
            text = node.dump();
        }
        if (text.find_first_of(",\"\n") != std::string::npos) {
            std::string quoted = "\"";
            for (char c : text) quoted += c == '"' ? std::string("\"\"") : std::string(1, c);
            text = quoted + "\"";
        }
        cols.emplace_back(prefix, text);
    };
    walk(walk, j, "");
    for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i].first;
    out << '\n';
    for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i].second;
    out << '\n';
}

}  // namespace qfid
