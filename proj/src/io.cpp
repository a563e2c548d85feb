#include "fpspec/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace fpspec {

JVal& JVal::set(const std::string& key, JVal v) {
    obj_.emplace_back(key, std::move(v));
    return *this;
}

JVal& JVal::push(JVal v) {
    arr_.push_back(std::move(v));
    return *this;
}

namespace {

void escape(std::string& out, const std::string& s) {
    out += '"';
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            case '\r': out += "\\r"; break;
            default:
                if (static_cast<unsigned char>(c) < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof buf, "\\u%04x", c);
                    out += buf;
                } else {
                    out += c;
                }
        }
    }
    out += '"';
}

}  // namespace

void JVal::write(std::string& out, int indent, int depth) const {
    const std::string pad(static_cast<size_t>(indent * (depth + 1)), ' ');
    const std::string padEnd(static_cast<size_t>(indent * depth), ' ');
    char buf[64];
    switch (type_) {
        case Type::Null: out += "null"; break;
        case Type::Bool: out += bool_ ? "true" : "false"; break;
        case Type::Int:
            std::snprintf(buf, sizeof buf, "%lld", int_);
            out += buf;
            break;
        case Type::Dbl:
            if (std::isfinite(dbl_)) {
                std::snprintf(buf, sizeof buf, "%.17g", dbl_);
                out += buf;
            } else {
                out += std::isnan(dbl_) ? "\"nan\"" : (dbl_ > 0 ? "\"inf\"" : "\"-inf\"");
            }
            break;
        case Type::Str: escape(out, str_); break;
        case Type::Arr: {
            if (arr_.empty()) { out += "[]"; break; }
            out += "[\n";
            for (size_t i = 0; i < arr_.size(); ++i) {
                out += pad;
                arr_[i].write(out, indent, depth + 1);
                if (i + 1 < arr_.size()) out += ',';
                out += '\n';
            }
            out += padEnd + "]";
            break;
        }
        case Type::Obj: {
            if (obj_.empty()) { out += "{}"; break; }
            out += "{\n";
            for (size_t i = 0; i < obj_.size(); ++i) {
                out += pad;
                escape(out, obj_[i].first);
                out += ": ";
                obj_[i].second.write(out, indent, depth + 1);
                if (i + 1 < obj_.size()) out += ',';
                out += '\n';
            }
            out += padEnd + "}";
            break;
        }
    }
}

std::string JVal::dump(int indent) const {
    std::string out;
    write(out, indent, 0);
    out += '\n';
    return out;
}

void writeTextFile(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("io: cannot write '" + path + "'");
    out << content;
}

namespace {

using nlohmann::json;

const json* find(const json& j, const std::string& key) {
    auto it = j.find(key);
    return it == j.end() ? nullptr : &*it;
}

double reqNumber(const json& j, const std::string& ptr) {
    if (!j.is_number()) throw ConfigError(ptr, "expected a number");
    return j.get<double>();
}

}  // namespace

RunConfig parseConfigText(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError("/", std::string("invalid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ConfigError("/", "config must be a JSON object");

    RunConfig cfg;
    if (const json* v = find(doc, "schema_version")) {
        if (!v->is_number_integer()) throw ConfigError("/schema_version", "expected an integer");
        cfg.schemaVersion = v->get<int>();
        if (cfg.schemaVersion != 1) throw ConfigError("/schema_version", "unsupported schema version");
    } else {
        throw ConfigError("/schema_version", "missing required key");
    }

    const json* grid = find(doc, "grid");
    if (!grid || !grid->is_object()) throw ConfigError("/grid", "missing grid object");
    const json* axes = find(*grid, "axes");
    if (!axes || !axes->is_array() || axes->empty()) throw ConfigError("/grid/axes", "expected a nonempty array");
    for (size_t i = 0; i < axes->size(); ++i) {
        const std::string ptr = "/grid/axes/" + std::to_string(i);
        const json& a = (*axes)[i];
        if (!a.is_object()) throw ConfigError(ptr, "expected an axis object");
        AxisSpec ax;
        const json* topo = find(a, "topology");
        if (!topo || !topo->is_string()) throw ConfigError(ptr + "/topology", "expected \"periodic\" or \"line\"");
        const std::string t = topo->get<std::string>();
        if (t == "periodic") ax.topology = Topology::Periodic;
        else if (t == "line") ax.topology = Topology::Line;
        else throw ConfigError(ptr + "/topology", "expected \"periodic\" or \"line\"");
        const json* nodes = find(a, "nodes");
        if (!nodes || !nodes->is_number_integer()) throw ConfigError(ptr + "/nodes", "expected an integer");
        ax.nodes = nodes->get<int>();
        if (ax.nodes < 8) throw ConfigError(ptr + "/nodes", "node count must be >= 8");
        const json* lo = find(a, "lo");
        const json* hi = find(a, "hi");
        if (!lo) throw ConfigError(ptr + "/lo", "missing");
        if (!hi) throw ConfigError(ptr + "/hi", "missing");
        ax.lo = reqNumber(*lo, ptr + "/lo");
        ax.hi = reqNumber(*hi, ptr + "/hi");
        if (!(ax.hi > ax.lo)) throw ConfigError(ptr + "/hi", "extent must be positive");
        cfg.grid.axes.push_back(ax);
    }
    if (cfg.grid.axes.size() > 2) throw ConfigError("/grid/axes", "dimension must be 1 or 2");
    const int D = static_cast<int>(cfg.grid.axes.size());

    const json* metric = find(doc, "metric");
    if (!metric || !metric->is_object()) throw ConfigError("/metric", "missing metric object");
    if (const json* th = find(*metric, "theta")) {
        const double t = reqNumber(*th, "/metric/theta");
        if (!(t > 0)) throw ConfigError("/metric/theta", "theta must be positive");
        cfg.metricMatrix = t * Eigen::MatrixXd::Identity(D, D);
    } else if (const json* m = find(*metric, "matrix")) {
        if (!m->is_array() || static_cast<int>(m->size()) != D)
            throw ConfigError("/metric/matrix", "expected a DxD array");
        cfg.metricMatrix.resize(D, D);
        for (int r = 0; r < D; ++r) {
            const json& row = (*m)[static_cast<size_t>(r)];
            if (!row.is_array() || static_cast<int>(row.size()) != D)
                throw ConfigError("/metric/matrix/" + std::to_string(r), "expected a row of length D");
            for (int c = 0; c < D; ++c)
                cfg.metricMatrix(r, c) =
                    reqNumber(row[static_cast<size_t>(c)],
                              "/metric/matrix/" + std::to_string(r) + "/" + std::to_string(c));
        }
    } else {
        throw ConfigError("/metric", "expected \"theta\" or \"matrix\"");
    }

    const json* flow = find(doc, "flow");
    if (!flow || !flow->is_object()) throw ConfigError("/flow", "missing flow object");
    if (const json* name = find(*flow, "name")) {
        if (!name->is_string()) throw ConfigError("/flow/name", "expected a string");
        cfg.flowName = name->get<std::string>();
        if (const json* params = find(*flow, "params")) {
            if (!params->is_object()) throw ConfigError("/flow/params", "expected an object");
            for (auto it = params->begin(); it != params->end(); ++it)
                cfg.flowParams[it.key()] = reqNumber(it.value(), "/flow/params/" + it.key());
        }
    } else if (const json* csv = find(*flow, "csv")) {
        if (!csv->is_string()) throw ConfigError("/flow/csv", "expected a path string");
        cfg.flowCsv = csv->get<std::string>();
        std::ifstream probe(cfg.flowCsv);
        if (!probe) throw ConfigError("/flow/csv", "referenced file does not exist");
    } else {
        throw ConfigError("/flow", "expected \"name\" or \"csv\"");
    }

    if (const json* tols = find(doc, "tolerances")) {
        if (!tols->is_object()) throw ConfigError("/tolerances", "expected an object");
        auto grab = [&](const char* key, double& target) {
            if (const json* v = find(*tols, key)) {
                target = reqNumber(*v, std::string("/tolerances/") + key);
                if (!(target > 0)) throw ConfigError(std::string("/tolerances/") + key, "must be positive");
            }
        };
        grab("tol_zero_rel", cfg.tol.tolZeroRel);
        grab("eps_gamma", cfg.tol.epsGamma);
        grab("eps_e", cfg.tol.epsE);
        grab("eps_div_rel", cfg.tol.epsDivRel);
    }

    if (const json* jobs = find(doc, "jobs")) {
        if (!jobs->is_object()) throw ConfigError("/jobs", "expected an object");
        if (const json* v = find(*jobs, "T_list")) {
            if (!v->is_array() || v->empty()) throw ConfigError("/jobs/T_list", "expected a nonempty array");
            cfg.tList.clear();
            for (size_t i = 0; i < v->size(); ++i)
                cfg.tList.push_back(reqNumber((*v)[i], "/jobs/T_list/" + std::to_string(i)));
        }
        if (const json* v = find(*jobs, "t_grid")) {
            if (!v->is_object()) throw ConfigError("/jobs/t_grid", "expected an object");
            if (const json* m = find(*v, "t_max")) cfg.tGridMax = reqNumber(*m, "/jobs/t_grid/t_max");
            if (const json* p = find(*v, "points")) {
                if (!p->is_number_integer()) throw ConfigError("/jobs/t_grid/points", "expected an integer");
                cfg.tGridPoints = p->get<int>();
                if (cfg.tGridPoints < 2) throw ConfigError("/jobs/t_grid/points", "need >= 2 points");
            }
        }
        auto grabInt = [&](const char* key, auto& target) {
            if (const json* v = find(*jobs, key)) {
                if (!v->is_number_integer()) throw ConfigError(std::string("/jobs/") + key, "expected an integer");
                target = v->get<std::decay_t<decltype(target)>>();
            }
        };
        auto grabDouble = [&](const char* key, double& target) {
            if (const json* v = find(*jobs, key)) target = reqNumber(*v, std::string("/jobs/") + key);
        };
        grabInt("samples", cfg.samples);
        if (cfg.samples < 1) throw ConfigError("/jobs/samples", "must be >= 1");
        if (const json* v = find(*jobs, "seed")) {
            if (!v->is_number_integer()) throw ConfigError("/jobs/seed", "expected an integer");
            cfg.seed = v->get<std::uint64_t>();
        }
        grabInt("threads", cfg.threads);
        grabDouble("dt", cfg.dt);
        if (!(cfg.dt > 0)) throw ConfigError("/jobs/dt", "must be positive");
        grabDouble("evolve_t", cfg.evolveT);
        grabInt("mc_steps", cfg.mcSteps);
        grabInt("noise_draws", cfg.noiseDraws);
        grabDouble("nicolai_t", cfg.nicolaiT);
        grabDouble("nicolai_dt", cfg.nicolaiDt);
        grabInt("scan_resolution", cfg.scanResolution);
        grabInt("eig_k", cfg.eigK);
        grabDouble("eig_shift", cfg.eigShift);
        if (const json* v = find(*jobs, "theta_sweep")) {
            if (!v->is_array()) throw ConfigError("/jobs/theta_sweep", "expected an array");
            for (size_t i = 0; i < v->size(); ++i)
                cfg.thetaSweep.push_back(reqNumber((*v)[i], "/jobs/theta_sweep/" + std::to_string(i)));
        }
        if (const json* v = find(*jobs, "eig_mode")) {
            if (!v->is_string()) throw ConfigError("/jobs/eig_mode", "expected \"dense\" or \"iterative\"");
            cfg.eigMode = v->get<std::string>();
            if (cfg.eigMode != "dense" && cfg.eigMode != "iterative")
                throw ConfigError("/jobs/eig_mode", "expected \"dense\" or \"iterative\"");
        }
        if (const json* v = find(*jobs, "known_axes")) {
            if (!v->is_string()) throw ConfigError("/jobs/known_axes", "expected \"x\" or \"y\"");
            const std::string s = v->get<std::string>();
            if (s == "x") cfg.knownAxes = 1u;
            else if (s == "y") cfg.knownAxes = 2u;
            else throw ConfigError("/jobs/known_axes", "expected \"x\" or \"y\"");
        }
        if (const json* v = find(*jobs, "observable1")) {
            if (!v->is_string()) throw ConfigError("/jobs/observable1", "expected a string");
            cfg.observable1 = v->get<std::string>();
        }
        if (const json* v = find(*jobs, "observable2")) {
            if (!v->is_string()) throw ConfigError("/jobs/observable2", "expected a string");
            cfg.observable2 = v->get<std::string>();
        }
        if (const json* v = find(*jobs, "evolve_init")) {
            if (!v->is_object()) throw ConfigError("/jobs/evolve_init", "expected an object");
            if (const json* k = find(*v, "kind")) {
                if (!k->is_string()) throw ConfigError("/jobs/evolve_init/kind", "expected a string");
                cfg.evolveInitKind = k->get<std::string>();
                if (cfg.evolveInitKind != "gaussian" && cfg.evolveInitKind != "uniform" &&
                    cfg.evolveInitKind != "delta")
                    throw ConfigError("/jobs/evolve_init/kind", "expected gaussian, uniform or delta");
            }
            if (const json* c = find(*v, "center")) {
                if (!c->is_array() || c->empty()) throw ConfigError("/jobs/evolve_init/center", "expected an array");
                for (size_t i = 0; i < c->size() && i < 2; ++i)
                    cfg.evolveInitCenter[i] = reqNumber((*c)[i], "/jobs/evolve_init/center/" + std::to_string(i));
            }
            if (const json* s = find(*v, "sigma")) cfg.evolveInitSigma = reqNumber(*s, "/jobs/evolve_init/sigma");
        }
    }

    if (const json* v = find(doc, "output_dir")) {
        if (!v->is_string()) throw ConfigError("/output_dir", "expected a string");
        cfg.outputDir = v->get<std::string>();
    }
    return cfg;
}

RunConfig parseConfig(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("/", "cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parseConfigText(ss.str());
}

double theta(const RunConfig& cfg) { return cfg.metricMatrix(0, 0); }

}  // namespace fpspec
