#include "gridmit/case_io.hpp"

#include <json.hpp>

#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace gridmit {

using json = nlohmann::json;

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& known,
                    const std::string& where, ParseMode mode,
                    std::vector<std::string>& warnings) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (known.count(it.key())) continue;
        std::string msg = "unknown field '" + it.key() + "' in " + where;
        if (mode == ParseMode::Strict) throw SchemaError(msg);
        warnings.push_back(msg);
    }
}

double require_number(const json& obj, const std::string& key, const std::string& where) {
    if (!obj.contains(key)) throw SchemaError("missing field '" + key + "' in " + where);
    if (!obj[key].is_number()) throw SchemaError("field '" + key + "' in " + where + " is not a number");
    return obj[key].get<double>();
}

double number_or(const json& obj, const std::string& key, double fallback) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_number()) throw SchemaError("field '" + key + "' is not a number");
    return obj[key].get<double>();
}

}  // namespace

CaseDocument parse_case_text(const std::string& text, ParseMode mode) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("malformed JSON: ") + e.what());
    }
    if (!root.is_object()) throw SchemaError("case document must be a JSON object");

    CaseDocument doc;
    reject_unknown(root,
                   {"schema_version", "base_mva", "name", "buses", "lines", "partition",
                    "defaulted_fields"},
                   "document root", mode, doc.warnings);
    if (!root.contains("schema_version") || !root["schema_version"].is_number_integer())
        throw SchemaError("missing integer field 'schema_version'");
    doc.schema_version = root["schema_version"].get<int>();
    if (doc.schema_version != 1)
        throw SchemaError("unsupported schema_version " + std::to_string(doc.schema_version));
    doc.base_mva = number_or(root, "base_mva", 100.0);
    if (doc.base_mva <= 0.0) throw ValueError("base_mva must be positive");
    doc.name = root.value("name", std::string());
    if (root.contains("defaulted_fields"))
        doc.defaulted_fields = root["defaulted_fields"].get<std::vector<std::string>>();

    if (!root.contains("buses") || !root["buses"].is_array() || root["buses"].empty())
        throw SchemaError("missing non-empty array 'buses'");
    std::set<int> seen_ids;
    for (const auto& jb : root["buses"]) {
        if (!jb.is_object()) throw SchemaError("bus entry is not an object");
        reject_unknown(jb,
                       {"id", "demand", "gen", "gen_min", "gen_max", "damping", "inertia",
                        "alpha_gen", "alpha_load", "cost", "area"},
                       "bus entry", mode, doc.warnings);
        Bus b;
        b.id = static_cast<int>(require_number(jb, "id", "bus entry"));
        if (!seen_ids.insert(b.id).second)
            throw ValueError("duplicate bus id " + std::to_string(b.id));
        b.demand = number_or(jb, "demand", 0.0);
        b.gen = number_or(jb, "gen", 0.0);
        b.gen_min = number_or(jb, "gen_min", 0.0);
        b.gen_max = number_or(jb, "gen_max", 0.0);
        b.damping = number_or(jb, "damping", 0.05);
        b.inertia = number_or(jb, "inertia", 0.1);
        b.alpha_gen = number_or(jb, "alpha_gen", 1.0);
        b.alpha_load = number_or(jb, "alpha_load", 0.01);
        b.cost = number_or(jb, "cost", 1.0);
        b.area = static_cast<int>(number_or(jb, "area", 1));
        if (b.demand < 0.0) throw ValueError("bus " + std::to_string(b.id) + ": negative demand");
        if (b.gen_max < b.gen_min)
            throw ValueError("bus " + std::to_string(b.id) + ": gen_max < gen_min");
        if (b.inertia <= 0.0) throw ValueError("bus " + std::to_string(b.id) + ": inertia must be positive");
        if (b.damping < 0.0) throw ValueError("bus " + std::to_string(b.id) + ": negative damping");
        if (b.alpha_gen <= 0.0 || b.alpha_load <= 0.0)
            throw ValueError("bus " + std::to_string(b.id) + ": alpha gains must be positive");
        doc.buses.push_back(b);
    }

    if (!root.contains("lines") || !root["lines"].is_array())
        throw SchemaError("missing array 'lines'");
    for (const auto& jl : root["lines"]) {
        if (!jl.is_object()) throw SchemaError("line entry is not an object");
        reject_unknown(jl, {"from", "to", "susceptance", "limit", "in_service"}, "line entry",
                       mode, doc.warnings);
        Line l;
        l.from = static_cast<int>(require_number(jl, "from", "line entry"));
        l.to = static_cast<int>(require_number(jl, "to", "line entry"));
        l.susceptance = require_number(jl, "susceptance", "line entry");
        l.limit = require_number(jl, "limit", "line entry");
        l.in_service = jl.value("in_service", true);
        if (l.susceptance <= 0.0)
            throw ValueError("line " + std::to_string(l.from) + "-" + std::to_string(l.to) +
                             ": susceptance must be positive");
        if (l.limit <= 0.0)
            throw ValueError("line " + std::to_string(l.from) + "-" + std::to_string(l.to) +
                             ": limit must be positive");
        doc.lines.push_back(l);
    }

    if (root.contains("partition")) {
        const json& jp = root["partition"];
        if (!jp.is_object()) throw SchemaError("'partition' must be an object");
        reject_unknown(jp, {"area_of", "switched_off"}, "partition", mode, doc.warnings);
        if (!jp.contains("area_of") || !jp["area_of"].is_object())
            throw SchemaError("partition requires object 'area_of'");
        for (auto it = jp["area_of"].begin(); it != jp["area_of"].end(); ++it) {
            int id;
            try {
                id = std::stoi(it.key());
            } catch (const std::exception&) {
                throw SchemaError("partition area_of key '" + it.key() + "' is not a bus id");
            }
            if (!it.value().is_number_integer())
                throw SchemaError("partition area for bus " + it.key() + " must be an integer");
            doc.partition_area_of[id] = it.value().get<int>();
        }
        if (jp.contains("switched_off")) {
            for (const auto& pair : jp["switched_off"]) {
                if (!pair.is_array() || pair.size() != 2)
                    throw SchemaError("switched_off entries must be [from, to] pairs");
                doc.partition_switched_off.emplace_back(pair[0].get<int>(), pair[1].get<int>());
            }
        }
    }
    return doc;
}

CaseDocument parse_case_file(const std::string& path, ParseMode mode) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open case file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_case_text(ss.str(), mode);
}

std::string serialize_case(const CaseDocument& doc) {
    json root;
    root["schema_version"] = doc.schema_version;
    root["base_mva"] = doc.base_mva;
    if (!doc.name.empty()) root["name"] = doc.name;
    root["buses"] = json::array();
    for (const Bus& b : doc.buses) {
        root["buses"].push_back({{"id", b.id},
                                 {"demand", b.demand},
                                 {"gen", b.gen},
                                 {"gen_min", b.gen_min},
                                 {"gen_max", b.gen_max},
                                 {"damping", b.damping},
                                 {"inertia", b.inertia},
                                 {"alpha_gen", b.alpha_gen},
                                 {"alpha_load", b.alpha_load},
                                 {"cost", b.cost},
                                 {"area", b.area}});
    }
    root["lines"] = json::array();
    for (const Line& l : doc.lines) {
        root["lines"].push_back({{"from", l.from},
                                 {"to", l.to},
                                 {"susceptance", l.susceptance},
                                 {"limit", l.limit},
                                 {"in_service", l.in_service}});
    }
    if (doc.has_partition()) {
        json area_of = json::object();
        for (auto& [id, area] : doc.partition_area_of) area_of[std::to_string(id)] = area;
        json off = json::array();
        for (auto& [f, t] : doc.partition_switched_off) off.push_back({f, t});
        root["partition"] = {{"area_of", area_of}, {"switched_off", off}};
    }
    if (!doc.defaulted_fields.empty()) root["defaulted_fields"] = doc.defaulted_fields;
    return root.dump(2) + "\n";
}

void write_case_file(const CaseDocument& doc, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write case file " + path);
    out << serialize_case(doc);
}

namespace {

/// Extracts the numeric matrix assigned to `mpc.<name> = [ ... ];`.
std::optional<std::vector<std::vector<double>>> matpower_matrix(const std::string& text,
                                                                const std::string& name) {
    const std::string key = "mpc." + name;
    size_t pos = 0;
    while ((pos = text.find(key, pos)) != std::string::npos) {
        size_t after = pos + key.size();
        // Require an '=' before the opening bracket.
        size_t eq = text.find_first_not_of(" \t", after);
        if (eq == std::string::npos || text[eq] != '=') {
            pos = after;
            continue;
        }
        size_t open = text.find('[', eq);
        if (open == std::string::npos) throw ParseError("missing '[' for " + key);
        size_t close = text.find(']', open);
        if (close == std::string::npos) throw ParseError("missing ']' for " + key);
        std::string body = text.substr(open + 1, close - open - 1);
        // Strip comments.
        std::string clean;
        std::istringstream lines(body);
        std::string line;
        while (std::getline(lines, line)) {
            size_t c = line.find('%');
            if (c != std::string::npos) line = line.substr(0, c);
            clean += line + "\n";
        }
        std::vector<std::vector<double>> rows;
        std::string rowtext;
        auto flush_row = [&]() {
            std::istringstream rs(rowtext);
            std::vector<double> row;
            double v;
            while (rs >> v) row.push_back(v);
            if (!row.empty()) rows.push_back(std::move(row));
            rowtext.clear();
        };
        for (char ch : clean) {
            if (ch == ';' || ch == '\n') {
                flush_row();
            } else {
                rowtext += ch;
            }
        }
        flush_row();
        return rows;
    }
    return std::nullopt;
}

double matpower_scalar(const std::string& text, const std::string& name) {
    const std::string key = "mpc." + name;
    size_t pos = text.find(key);
    if (pos == std::string::npos) throw ParseError("missing " + key);
    size_t eq = text.find('=', pos);
    size_t semi = text.find(';', eq);
    if (eq == std::string::npos || semi == std::string::npos)
        throw ParseError("malformed assignment for " + key);
    return std::stod(text.substr(eq + 1, semi - eq - 1));
}

}  // namespace

CaseDocument import_matpower_text(const std::string& text) {
    if (text.find("mpc.dcline") != std::string::npos)
        throw UnsupportedFeature("DC lines are not supported");

    CaseDocument doc;
    doc.base_mva = matpower_scalar(text, "baseMVA");
    if (doc.base_mva <= 0.0) throw ValueError("baseMVA must be positive");
    const double base = doc.base_mva;

    auto bus_rows = matpower_matrix(text, "bus");
    auto gen_rows = matpower_matrix(text, "gen");
    auto branch_rows = matpower_matrix(text, "branch");
    auto gencost_rows = matpower_matrix(text, "gencost");
    if (!bus_rows || !branch_rows) throw ParseError("case needs mpc.bus and mpc.branch");

    std::map<int, Bus> bus_of;
    std::vector<int> order;
    for (const auto& row : *bus_rows) {
        if (row.size() < 7) throw ParseError("bus row has fewer than 7 columns");
        Bus b;
        b.id = static_cast<int>(row[0]);
        b.demand = row[2] / base;  // Pd
        if (b.demand < 0.0) {
            doc.warnings.push_back("bus " + std::to_string(b.id) +
                                   ": negative load folded into generation");
            b.gen += -b.demand;
            b.gen_max += -b.demand;
            b.demand = 0.0;
        }
        b.area = static_cast<int>(row[6]);
        if (b.area <= 0) b.area = 1;
        bus_of[b.id] = b;
        order.push_back(b.id);
    }
    if (gen_rows) {
        size_t gi = 0;
        for (const auto& row : *gen_rows) {
            if (row.size() < 10) throw ParseError("gen row has fewer than 10 columns");
            int id = static_cast<int>(row[0]);
            auto it = bus_of.find(id);
            if (it == bus_of.end())
                throw ValueError("generator references unknown bus " + std::to_string(id));
            bool on = row[7] > 0.0;  // status
            if (on) {
                it->second.gen += row[1] / base;       // Pg
                it->second.gen_max += row[8] / base;   // Pmax
                it->second.gen_min += row[9] / base;   // Pmin
                if (gencost_rows && gi < gencost_rows->size()) {
                    const auto& c = (*gencost_rows)[gi];
                    // Polynomial cost model: c2 column for n=3.
                    if (c.size() >= 5 && c[0] == 2.0 && c[3] >= 3.0 && c[4] > 0.0)
                        it->second.cost = c[4] * base * base;
                }
            }
            ++gi;
        }
    }
    doc.defaulted_fields = {"inertia", "damping", "alpha_gen", "alpha_load"};

    for (const auto& row : *branch_rows) {
        if (row.size() < 11) throw ParseError("branch row has fewer than 11 columns");
        Line l;
        l.from = static_cast<int>(row[0]);
        l.to = static_cast<int>(row[1]);
        double x = row[3];
        if (x == 0.0) throw ValueError("branch " + std::to_string(l.from) + "-" +
                                       std::to_string(l.to) + ": zero reactance");
        if (x < 0.0)
            throw UnsupportedFeature("branch " + std::to_string(l.from) + "-" +
                                     std::to_string(l.to) + ": negative reactance");
        l.susceptance = 1.0 / x;
        double tap = row[8];
        if (tap != 0.0 && tap != 1.0) {
            l.susceptance /= tap;
            doc.warnings.push_back("branch " + std::to_string(l.from) + "-" +
                                   std::to_string(l.to) + ": tap ratio " +
                                   std::to_string(tap) + " folded into susceptance");
        }
        double rate_a = row[5];
        if (rate_a > 0.0) {
            l.limit = rate_a / base;
        } else {
            l.limit = 1e6;
            doc.warnings.push_back("branch " + std::to_string(l.from) + "-" +
                                   std::to_string(l.to) + ": no rating, treated as unlimited");
        }
        l.in_service = row[10] > 0.0;
        doc.lines.push_back(l);
    }
    for (int id : order) doc.buses.push_back(bus_of[id]);
    return doc;
}

CaseDocument import_matpower(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open MATPOWER file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return import_matpower_text(ss.str());
}

CaseDocument load_case(const std::string& path, ParseMode mode) {
    if (path.size() >= 2 && path.substr(path.size() - 2) == ".m") return import_matpower(path);
    return parse_case_file(path, mode);
}

GridCase load_grid(const std::string& path, ParseMode mode) {
    return load_case(path, mode).to_grid();
}

Partition partition_from_document(const GridCase& grid, const CaseDocument& doc) {
    if (!doc.has_partition()) throw ValueError("case document has no partition block");
    Partition part;
    part.area_of.assign(grid.bus_count(), 0);
    std::vector<bool> covered(grid.bus_count(), false);
    for (auto& [id, area] : doc.partition_area_of) {
        int idx = grid.bus_index(id);
        part.area_of[idx] = area;
        covered[idx] = true;
    }
    for (int v = 0; v < grid.bus_count(); ++v)
        if (!covered[v])
            throw ValueError("partition omits bus " + std::to_string(grid.bus_id(v)));
    for (auto& [f, t] : doc.partition_switched_off) {
        auto line = grid.find_line(f, t);
        if (!line)
            throw ValueError("switched_off references unknown line " + std::to_string(f) +
                             "-" + std::to_string(t));
        part.switched_off.push_back(*line);
    }
    std::sort(part.switched_off.begin(), part.switched_off.end());
    return part;
}

void attach_partition(CaseDocument& doc, const GridCase& grid, const Partition& part) {
    doc.partition_area_of.clear();
    doc.partition_switched_off.clear();
    for (int v = 0; v < grid.bus_count(); ++v)
        doc.partition_area_of[grid.bus_id(v)] = part.area_of[v];
    for (int e : part.switched_off) {
        const Line& l = grid.lines()[e];
        doc.partition_switched_off.emplace_back(l.from, l.to);
    }
}

}  // namespace gridmit
