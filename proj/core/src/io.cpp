#include "pagarch/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace pagarch {

namespace {

using nlohmann::json;

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

// Splits one CSV line; double-quoted fields may contain commas.
std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t k = 0; k < line.size(); ++k) {
        const char c = line[k];
        if (quoted) {
            if (c == '"' && k + 1 < line.size() && line[k + 1] == '"') {
                cur += '"';
                ++k;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(trim(cur));
    return out;
}

double parse_number(const std::string& s, long line, const std::string& column) {
    double v = 0.0;
    std::size_t pos = 0;
    bool ok = !s.empty();
    if (ok) {
        try {
            v = std::stod(s, &pos);
        } catch (const std::exception&) {
            ok = false;
        }
    }
    if (!ok || pos != s.size() || !std::isfinite(v)) {
        throw ValidationError("line " + std::to_string(line) + ": column '" + column + "' is not a finite number: '" +
                              s + "'");
    }
    return v;
}

long long parse_time(const std::string& s, long line) {
    long long v = 0;
    std::size_t pos = 0;
    bool ok = !s.empty();
    if (ok) {
        try {
            v = std::stoll(s, &pos);
        } catch (const std::exception&) {
            ok = false;
        }
    }
    if (!ok || pos != s.size()) {
        throw ValidationError("line " + std::to_string(line) + ": time is not an integer: '" + s + "'");
    }
    return v;
}

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json numbers(const std::vector<double>& v) {
    json a = json::array();
    for (double x : v) a.push_back(number(x));
    return a;
}

double get_number(const json& j) {
    return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

std::vector<double> get_numbers(const json& j) {
    std::vector<double> out;
    for (const auto& x : j) out.push_back(get_number(x));
    return out;
}

json interval(const IntervalRecord& r) {
    return {{"estimate", number(r.estimate)}, {"se", number(r.se)}, {"lower", number(r.lower)},
            {"upper", number(r.upper)}};
}

IntervalRecord get_interval(const json& j) {
    return {get_number(j.at("estimate")), get_number(j.at("se")), get_number(j.at("lower")),
            get_number(j.at("upper"))};
}

}  // namespace

std::string IngestResult::summary() const {
    return "N=" + std::to_string(panel.n_units()) + ", T=" + std::to_string(panel.n_periods()) +
           ", D_x=" + std::to_string(panel.n_regressors());
}

IngestResult read_panel_csv(std::istream& in, const CsvSchema& schema) {
    std::string line;
    long line_no = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++line_no;
        if (!trim(line).empty()) {
            header = split_csv(line);
            break;
        }
    }
    if (header.empty()) throw ValidationError("CSV is empty");
    int iu = -1, it = -1, iy = -1;
    std::vector<int> ix;
    IngestResult result;
    for (int k = 0; k < static_cast<int>(header.size()); ++k) {
        const std::string& h = header[static_cast<std::size_t>(k)];
        if (std::count(header.begin(), header.end(), h) > 1) throw ValidationError("duplicate CSV column '" + h + "'");
        if (h == schema.unit_column) {
            iu = k;
        } else if (h == schema.time_column) {
            it = k;
        } else if (h == schema.y_column) {
            iy = k;
        } else {
            ix.push_back(k);
            result.regressor_names.push_back(h);
        }
    }
    if (iu < 0 || it < 0 || iy < 0) {
        throw ValidationError("CSV header must contain '" + schema.unit_column + "', '" + schema.time_column +
                              "' and '" + schema.y_column + "'");
    }

    struct Row {
        double y;
        std::vector<double> x;
        long line;
    };
    std::map<std::string, std::map<long long, Row>> cells;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto f = split_csv(line);
        if (f.size() != header.size()) {
            throw ValidationError("line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                                  " fields, found " + std::to_string(f.size()));
        }
        const std::string& unit = f[static_cast<std::size_t>(iu)];
        if (unit.empty()) throw ValidationError("line " + std::to_string(line_no) + ": empty unit id");
        const long long t = parse_time(f[static_cast<std::size_t>(it)], line_no);
        Row row{parse_number(f[static_cast<std::size_t>(iy)], line_no, schema.y_column), {}, line_no};
        for (std::size_t d = 0; d < ix.size(); ++d) {
            row.x.push_back(parse_number(f[static_cast<std::size_t>(ix[d])], line_no, result.regressor_names[d]));
        }
        auto [pos, inserted] = cells[unit].emplace(t, std::move(row));
        if (!inserted) {
            throw ValidationError("duplicate key (unit '" + unit + "', time " + std::to_string(t) + ") on lines " +
                                  std::to_string(pos->second.line) + " and " + std::to_string(line_no));
        }
    }
    if (cells.empty()) throw ValidationError("CSV has no data rows");

    long long t_min = std::numeric_limits<long long>::max(), t_max = std::numeric_limits<long long>::min();
    for (const auto& [u, m] : cells) {
        t_min = std::min(t_min, m.begin()->first);
        t_max = std::max(t_max, m.rbegin()->first);
    }
    if (t_max - t_min >= 10'000'000) throw ValidationError("time range too large");
    std::vector<std::string> missing;
    std::size_t n_missing = 0;
    for (const auto& [u, m] : cells) {
        for (long long t = t_min; t <= t_max; ++t) {
            if (m.count(t) == 0) {
                ++n_missing;
                if (missing.size() < 20) missing.push_back("(" + u + ", " + std::to_string(t) + ")");
            }
        }
    }
    if (n_missing > 0) {
        std::string msg = "ragged panel: " + std::to_string(n_missing) + " missing (unit, time) cells:";
        for (const auto& m : missing) msg += " " + m;
        if (n_missing > missing.size()) msg += " ...";
        throw ValidationError(msg);
    }

    const int N = static_cast<int>(cells.size());
    const int T = static_cast<int>(t_max - t_min + 1);
    PanelData& p = result.panel;
    p.y.resize(N, T);
    p.x.assign(ix.size(), Matrix(N, T));
    int i = 0;
    for (const auto& [u, m] : cells) {  // std::map: lexicographic unit order
        p.unit_ids.push_back(u);
        for (const auto& [t, row] : m) {
            const auto c = static_cast<Eigen::Index>(t - t_min);
            p.y(i, c) = row.y;
            for (std::size_t d = 0; d < ix.size(); ++d) p.x[d](i, c) = row.x[d];
        }
        ++i;
    }
    result.first_time = t_min;
    p.validate();
    return result;
}

IngestResult read_panel_csv_file(const std::string& path, const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open '" + path + "'");
    return read_panel_csv(in, schema);
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_panel_csv(std::ostream& out, const PanelData& panel, long long first_time,
                     const std::vector<std::string>& regressor_names) {
    out << "unit_id,time,y";
    for (int d = 0; d < panel.n_regressors(); ++d) {
        out << ',' << (static_cast<std::size_t>(d) < regressor_names.size() ? regressor_names[static_cast<std::size_t>(d)]
                                                                           : "x" + std::to_string(d + 1));
    }
    out << '\n';
    for (int i = 0; i < panel.n_units(); ++i) {
        const std::string id = panel.unit_label(i);
        for (int t = 0; t < panel.n_periods(); ++t) {
            out << id << ',' << first_time + t << ',' << format_double(panel.y(i, t));
            for (const auto& x : panel.x) out << ',' << format_double(x(i, t));
            out << '\n';
        }
    }
}

void write_panel_csv_file(const std::string& path, const PanelData& panel, long long first_time,
                          const std::vector<std::string>& regressor_names) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write '" + path + "'");
    write_panel_csv(out, panel, first_time, regressor_names);
}

std::map<std::string, std::string> read_key_values(std::istream& in) {
    std::map<std::string, std::string> kv;
    std::string line;
    long n = 0;
    while (std::getline(in, line)) {
        ++n;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        if (trim(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ValidationError("config line " + std::to_string(n) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) throw ValidationError("config line " + std::to_string(n) + ": empty key");
        if (!kv.emplace(key, trim(line.substr(eq + 1))).second) {
            throw ValidationError("config line " + std::to_string(n) + ": duplicate key '" + key + "'");
        }
    }
    return kv;
}

std::map<std::string, std::string> read_key_values_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config '" + path + "'");
    return read_key_values(in);
}

void reject_unknown_keys(const std::map<std::string, std::string>& kv, const std::set<std::string>& allowed,
                         const std::string& context) {
    for (const auto& [k, v] : kv) {
        if (allowed.count(k) == 0) throw ValidationError("unknown " + context + " key '" + k + "'");
    }
}

std::string to_json(const ResultDocument& d) {
    json j;
    j["tool_version"] = d.tool_version;
    j["command"] = d.command;
    j["seed"] = d.seed;
    j["orders"] = {{"P", d.orders.P}, {"Q", d.orders.Q}, {"L", d.orders.L}, {"K", d.orders.K}, {"Dx", d.orders.Dx}};
    j["n_units"] = d.n_units;
    j["n_periods"] = d.n_periods;
    j["unit_ids"] = d.unit_ids;
    j["lambda"] = numbers(d.lambda);
    j["lambda_se"] = numbers(d.lambda_se);
    j["mu"] = numbers(d.mu);
    j["zeta"] = numbers(d.zeta);
    j["zeta_se"] = numbers(d.zeta_se);
    j["omega"] = numbers(d.omega);
    j["varpi"] = numbers(d.varpi);
    j["correction_method"] = d.correction_method;
    j["correction"] = json::object();
    for (const auto& [k, v] : d.correction) j["correction"][k] = numbers(v);
    j["diagnostics"] = json::object();
    for (const auto& [k, v] : d.diagnostics) j["diagnostics"][k] = number(v);
    j["level"] = number(d.level);
    j["fixed_effects"] = json::array();
    for (const auto& f : d.fixed_effects) {
        j["fixed_effects"].push_back(
            {{"unit", f.unit}, {"mu", interval(f.mu)}, {"omega", interval(f.omega)}, {"varpi", interval(f.varpi)}});
    }
    return j.dump(2) + "\n";
}

ResultDocument result_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("result document is not valid JSON: ") + e.what());
    }
    ResultDocument d;
    try {
        d.tool_version = j.at("tool_version").get<std::string>();
        d.command = j.at("command").get<std::string>();
        d.seed = j.at("seed").get<std::uint64_t>();
        const auto& o = j.at("orders");
        d.orders = {o.at("P").get<int>(), o.at("Q").get<int>(), o.at("L").get<int>(), o.at("K").get<int>(),
                    o.at("Dx").get<int>()};
        d.n_units = j.at("n_units").get<int>();
        d.n_periods = j.at("n_periods").get<int>();
        d.unit_ids = j.at("unit_ids").get<std::vector<std::string>>();
        d.lambda = get_numbers(j.at("lambda"));
        d.lambda_se = get_numbers(j.at("lambda_se"));
        d.mu = get_numbers(j.at("mu"));
        d.zeta = get_numbers(j.at("zeta"));
        d.zeta_se = get_numbers(j.at("zeta_se"));
        d.omega = get_numbers(j.at("omega"));
        d.varpi = get_numbers(j.at("varpi"));
        d.correction_method = j.at("correction_method").get<std::string>();
        for (const auto& [k, v] : j.at("correction").items()) d.correction[k] = get_numbers(v);
        for (const auto& [k, v] : j.at("diagnostics").items()) d.diagnostics[k] = get_number(v);
        d.level = get_number(j.at("level"));
        for (const auto& f : j.at("fixed_effects")) {
            d.fixed_effects.push_back({f.at("unit").get<std::string>(), get_interval(f.at("mu")),
                                       get_interval(f.at("omega")), get_interval(f.at("varpi"))});
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed result document: ") + e.what());
    }
    return d;
}

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

Vector to_eigen(const std::vector<double>& v) {
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write '" + path + "'");
    out << text;
}

}  // namespace pagarch
