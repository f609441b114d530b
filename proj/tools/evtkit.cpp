#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "evtkit/condrew.hpp"
#include "evtkit/errors.hpp"
#include "evtkit/evt.hpp"
#include "evtkit/graph.hpp"
#include "evtkit/kernels.hpp"
#include "evtkit/model.hpp"
#include "evtkit/oracle.hpp"
#include "evtkit/stationary.hpp"

namespace {

using evtkit::Rational;
using Json = nlohmann::ordered_json;

enum class Format { kHuman, kJson, kCsv };

struct Config {
    std::string model;
    std::string method = "ii";
    std::string criterion = "rel";
    std::optional<std::string> epsilon;
    bool topological = false;
    std::string absolute_budget = "linear";
    bool topological_sweep = false;
    std::string strategy = "evt-full";
    std::string reward;
    std::vector<std::string> targets;
    std::string backend = "float";
    bool json = false;
    bool csv = false;
    bool omit_timing = false;
    std::size_t max_iterations = 10'000'000;
};

Format format_of(const Config& c) {
    if (c.json && c.csv) throw evtkit::ConfigError("--json and --csv are mutually exclusive");
    return c.json ? Format::kJson : c.csv ? Format::kCsv : Format::kHuman;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw evtkit::ModelError("cannot open model file " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

// Rational values become "num/den" strings, floats JSON numbers, infinity "inf".
template <evtkit::Value V>
Json to_json(const V& x) {
    if constexpr (evtkit::kIsRational<V>) {
        return evtkit::format_number(x);
    } else {
        return x;
    }
}

template <evtkit::Value V>
Json to_json(const evtkit::Extended<V>& x) {
    return x.is_infinite() ? Json("inf") : to_json(x.value());
}

// ordered_json looks keys up linearly; state names are unique, so append without the search.
void append(Json& object, const std::string& key, Json value) {
    if (object.is_null()) object = Json::object();
    auto& members = object.get_ref<Json::object_t&>();
    members.Json::object_t::Container::emplace_back(key, std::move(value));
}

template <evtkit::Value V>
Json optional_json(const std::optional<V>& x) {
    return x ? to_json(*x) : Json(nullptr);
}

template <evtkit::Value V>
std::string text(const evtkit::Extended<V>& x) {
    return evtkit::format_extended(x);
}

template <evtkit::Value V>
std::string text(const V& x) {
    return evtkit::format_number(x);
}

// Precision defaults: 1e-6 for the unsound value iterations, 1e-3 otherwise.
template <evtkit::Value V>
V epsilon_of(const Config& c, evtkit::Method method) {
    if (c.epsilon) return evtkit::parse_number<V>(*c.epsilon);
    const bool vi = method == evtkit::Method::kValueIteration || method == evtkit::Method::kGaussSeidelValueIteration;
    return evtkit::parse_number<V>(vi ? "1/1000000" : "1/1000");
}

class Timer {
public:
    double milliseconds() const {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

template <evtkit::Value V>
Json header(const char* command, evtkit::Method method, const V& eps) {
    Json j;
    j["command"] = command;
    j["backend"] = evtkit::NumberTraits<V>::name;
    j["method"] = std::string(evtkit::to_string(method));
    j["epsilon"] = to_json(eps);
    return j;
}

void finish(Json& j, const Config& c, const Timer& timer) {
    if (!c.omit_timing) j["wall_time_ms"] = timer.milliseconds();
}

std::string bscc_label(const std::vector<std::string>& names, const std::vector<evtkit::StateId>& members) {
    if (members.size() == 1) return names[members.front()];
    std::string label = "{";
    for (std::size_t i = 0; i < members.size(); ++i) label += (i ? "," : "") + names[members[i]];
    return label + "}";
}

template <evtkit::Value V>
int run_evt(const Config& c) {
    Timer timer;
    const Format format = format_of(c);
    const auto chain = evtkit::parse_model<V>(read_file(c.model));
    evtkit::EvtRequest<V> request;
    request.method = evtkit::parse_method(c.method);
    request.criterion = evtkit::parse_criterion(c.criterion);
    request.epsilon = epsilon_of<V>(c, request.method);
    request.topological = c.topological;
    if (c.absolute_budget == "linear") {
        request.absolute_budget = evtkit::AbsoluteBudget::kLinear;
    } else if (c.absolute_budget == "compounded") {
        request.absolute_budget = evtkit::AbsoluteBudget::kCompounded;
    } else {
        throw evtkit::ConfigError("unknown absolute budget '" + c.absolute_budget + "'");
    }
    request.topological_sweep = c.topological_sweep;
    request.iteration.max_iterations = c.max_iterations;
    const auto result = evtkit::compute_evts(chain, request);

    if (format == Format::kJson) {
        Json j = header("evt", result.method, result.epsilon);
        j["criterion"] = std::string(evtkit::to_string(result.criterion));
        j["topological"] = result.topological;
        j["continuous_time"] = chain.is_continuous_time();
        j["certified"] = result.certified();
        j["certified_bound"] = optional_json(result.certified_bound);
        j["iterations"] = result.iterations;
        Json values = Json::object();
        for (evtkit::StateId s = 0; s < chain.size(); ++s) {
            Json entry;
            entry["value"] = to_json(result.values[s]);
            entry["certified"] = result.certified();
            if (result.bounds) {
                // Bounds are only tracked for the finite components.
                const bool finite = result.values[s].is_finite();
                entry["lower"] = finite ? to_json(result.bounds->lower[s]) : Json("inf");
                entry["upper"] = finite ? to_json(result.bounds->upper[s]) : Json("inf");
            }
            append(values, chain.name(s), std::move(entry));
        }
        j["values"] = std::move(values);
        finish(j, c, timer);
        std::cout << j.dump(2) << '\n';
    } else if (format == Format::kCsv) {
        std::cout << "state,value\n";
        for (evtkit::StateId s = 0; s < chain.size(); ++s) {
            std::cout << chain.name(s) << ',' << text(result.values[s]) << '\n';
        }
    } else {
        std::cout << "method " << evtkit::to_string(result.method) << ", criterion "
                  << evtkit::to_string(result.criterion) << ", epsilon " << text(result.epsilon) << ", "
                  << (result.certified() ? "certified bound " + text(*result.certified_bound) : std::string("uncertified"))
                  << ", " << result.iterations << " iterations\n";
        for (evtkit::StateId s = 0; s < chain.size(); ++s) {
            std::cout << chain.name(s) << '\t' << text(result.values[s]) << '\n';
        }
    }
    return 0;
}

template <evtkit::Value V>
int run_stationary(const Config& c) {
    Timer timer;
    const Format format = format_of(c);
    if (c.criterion != "rel") throw evtkit::ConfigError("stationary analysis supports the relative criterion only");
    const auto chain = evtkit::parse_model<V>(read_file(c.model));
    evtkit::StationaryRequest<V> request;
    request.strategy = evtkit::parse_strategy(c.strategy);
    request.method = evtkit::parse_method(c.method);
    request.epsilon = epsilon_of<V>(c, request.method);
    request.iteration.max_iterations = c.max_iterations;
    const auto result = evtkit::stationary_distribution(chain, request);
    const evtkit::SccDecomposition scc(chain);

    if (format == Format::kJson) {
        Json j = header("stationary", result.method, result.epsilon);
        j["strategy"] = std::string(evtkit::to_string(result.strategy));
        j["criterion"] = "rel";
        j["certified"] = result.certified_rel_error.has_value();
        j["certified_rel_error"] = optional_json(result.certified_rel_error);
        j["iterations"] = result.iterations;
        Json pi = Json::object();
        for (evtkit::StateId s = 0; s < chain.size(); ++s) append(pi, chain.name(s), to_json(result.values[s]));
        j["pi"] = std::move(pi);
        Json reach = Json::object();
        for (std::size_t i = 0; i < result.bsccs.size(); ++i) {
            append(reach, bscc_label(chain.names(), scc.members(result.bsccs[i])), to_json(result.bscc_reach[i]));
        }
        j["bscc_reach"] = std::move(reach);
        finish(j, c, timer);
        std::cout << j.dump(2) << '\n';
    } else if (format == Format::kCsv) {
        std::cout << "state,pi\n";
        for (evtkit::StateId s = 0; s < chain.size(); ++s) {
            std::cout << chain.name(s) << ',' << text(result.values[s]) << '\n';
        }
    } else {
        std::cout << "strategy " << evtkit::to_string(result.strategy) << ", method " << evtkit::to_string(result.method)
                  << ", "
                  << (result.certified_rel_error ? "certified relative error " + text(*result.certified_rel_error)
                                                 : std::string("uncertified"))
                  << '\n';
        for (std::size_t i = 0; i < result.bsccs.size(); ++i) {
            std::cout << "reach " << bscc_label(chain.names(), scc.members(result.bsccs[i])) << '\t'
                      << text(result.bscc_reach[i]) << '\n';
        }
        for (evtkit::StateId s = 0; s < chain.size(); ++s) {
            std::cout << chain.name(s) << '\t' << text(result.values[s]) << '\n';
        }
    }
    return 0;
}

template <evtkit::Value V>
int run_condrew(const Config& c) {
    Timer timer;
    const Format format = format_of(c);
    if (c.reward.empty()) throw evtkit::ConfigError("condrew requires --reward");
    const auto chain = evtkit::parse_model<V>(read_file(c.model));
    evtkit::CondRewRequest<V> request;
    request.reward = c.reward;
    request.method = evtkit::parse_method(c.method);
    request.criterion = evtkit::parse_criterion(c.criterion);
    request.epsilon = epsilon_of<V>(c, request.method);
    request.targets = c.targets;
    request.iteration.max_iterations = c.max_iterations;
    const auto result = evtkit::conditional_expected_rewards(chain, request);

    auto value_json = [](const std::optional<evtkit::Extended<V>>& x) { return x ? to_json(*x) : Json(nullptr); };
    if (format == Format::kJson) {
        Json j = header("condrew", result.method, result.epsilon);
        j["criterion"] = std::string(evtkit::to_string(result.criterion));
        j["reward"] = c.reward;
        j["certified"] = result.certified;
        j["iterations"] = result.iterations;
        j["auxiliary_solves"] = result.auxiliary_solves;
        Json targets = Json::object();
        for (const auto& t : result.targets) {
            Json entry;
            entry["reach_probability"] = to_json(t.reach_probability);
            entry["value"] = value_json(t.value);
            if (t.lower) entry["lower"] = value_json(t.lower);
            if (t.upper) entry["upper"] = value_json(t.upper);
            append(targets, t.name, std::move(entry));
        }
        j["targets"] = std::move(targets);
        finish(j, c, timer);
        std::cout << j.dump(2) << '\n';
    } else if (format == Format::kCsv) {
        std::cout << "target,reach_probability,value,lower,upper\n";
        auto cell = [](const std::optional<evtkit::Extended<V>>& x) { return x ? text(*x) : std::string(); };
        for (const auto& t : result.targets) {
            std::cout << t.name << ',' << text(t.reach_probability) << ',' << cell(t.value) << ',' << cell(t.lower)
                      << ',' << cell(t.upper) << '\n';
        }
    } else {
        std::cout << "reward " << c.reward << ", method " << evtkit::to_string(result.method) << ", "
                  << (result.certified ? "certified" : "uncertified") << '\n';
        for (const auto& t : result.targets) {
            std::cout << t.name << "\treach " << text(t.reach_probability) << "\tvalue "
                      << (t.value ? text(*t.value) : std::string("unreachable"));
            if (t.lower && t.upper) std::cout << "\t[" << text(*t.lower) << ", " << text(*t.upper) << ']';
            std::cout << '\n';
        }
    }
    return 0;
}

int run_analyze_graph(const Config& c) {
    Timer timer;
    const auto chain = evtkit::parse_model<Rational>(read_file(c.model));
    const evtkit::SccDecomposition scc(chain);
    std::size_t transient = 0;
    std::size_t reachable = 0;
    for (evtkit::StateId s = 0; s < chain.size(); ++s) {
        transient += scc.is_transient(s);
        reachable += scc.is_reachable(s);
    }
    Json j;
    j["command"] = "analyze-graph";
    j["states"] = chain.size();
    j["transitions"] = chain.transitions().nonzeros();
    j["transient_states"] = transient;
    j["reachable_states"] = reachable;
    j["scc_count"] = scc.scc_count();
    j["L"] = scc.longest_chain();
    j["T"] = scc.max_incoming();
    j["levels"] = scc.levels().size();
    j["q"] = evtkit::format_number(evtkit::global_escape_bound(chain, scc));
    Json bsccs = Json::array();
    for (evtkit::SccId b : scc.bottom_sccs()) bsccs.push_back(bscc_label(chain.names(), scc.members(b)));
    j["bsccs"] = std::move(bsccs);
    finish(j, c, timer);
    std::cout << j.dump(2) << '\n';
    return 0;
}

void write_output(const std::string& path, const std::string& content) {
    if (path.empty()) {
        std::cout << content;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw evtkit::ConfigError("cannot write " + path);
    out << content;
}

template <typename F>
int dispatch(const Config& c, F&& run) {
    // Exact elimination is only meaningful over rationals.
    if (c.method == "lu-exact" || c.backend == "rational") return run(Rational{});
    if (c.backend != "float") throw evtkit::ConfigError("unknown backend '" + c.backend + "'");
    return run(double{});
}

void add_solver_flags(CLI::App* cmd, Config& c, bool with_criterion) {
    cmd->add_option("model", c.model, "model file")->required();
    cmd->add_option("--method", c.method, "vi, gs-vi, ii, gs-ii, lu or lu-exact")->capture_default_str();
    if (with_criterion) cmd->add_option("--criterion", c.criterion, "abs or rel")->capture_default_str();
    cmd->add_option("--epsilon", c.epsilon, "precision (default 1e-6 for vi/gs-vi, 1e-3 otherwise)");
    cmd->add_option("--backend", c.backend, "float or rational")->capture_default_str();
    cmd->add_option("--max-iterations", c.max_iterations, "iteration cap")->capture_default_str();
    cmd->add_flag("--json", c.json, "JSON output");
    cmd->add_flag("--csv", c.csv, "CSV output");
    cmd->add_flag("--omit-timing", c.omit_timing, "leave wall time out of JSON output");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Expected visiting times, stationary distributions and conditional rewards of Markov chains"};
    app.require_subcommand(1);
    Config c;
    std::optional<int> threads;
    app.add_option("--threads", threads, "worker threads (also EVTKIT_THREADS)");

    auto* evt = app.add_subcommand("evt", "expected visiting times");
    add_solver_flags(evt, c, true);
    evt->add_flag("--topological", c.topological, "solve SCC by SCC");
    evt->add_option("--absolute-budget", c.absolute_budget, "linear or compounded")->capture_default_str();
    evt->add_flag("--topological-sweep", c.topological_sweep, "Gauss-Seidel sweeps in topological order");

    auto* stationary = app.add_subcommand("stationary", "stationary distribution");
    add_solver_flags(stationary, c, false);
    stationary->add_option("--strategy", c.strategy, "classic, evt-reach or evt-full")->capture_default_str();

    auto* condrew = app.add_subcommand("condrew", "conditional expected total rewards");
    add_solver_flags(condrew, c, true);
    condrew->add_option("--reward", c.reward, "reward structure")->required();
    condrew->add_option("--target", c.targets, "state in a target BSCC (repeatable)");

    auto* graph = app.add_subcommand("analyze-graph", "SCC statistics as JSON");
    graph->add_option("model", c.model, "model file")->required();
    graph->add_flag("--omit-timing", c.omit_timing, "leave wall time out of the output");

    auto* generate = app.add_subcommand("generate", "write a generated model");
    generate->require_subcommand(1);
    std::string output;
    unsigned faces = 6;
    auto* fdr = generate->add_subcommand("fdr", "Fast Dice Roller for a fair N-sided die");
    fdr->add_option("--n", faces, "number of faces")->capture_default_str();
    fdr->add_option("-o,--output", output, "output file (default stdout)");
    std::uint64_t seed = 0;
    evtkit::oracle::RandomChainOptions random_options;
    auto* random = generate->add_subcommand("random", "seeded random chain");
    random->add_option("--seed", seed, "seed")->capture_default_str();
    random->add_option("--states", random_options.states, "state count")->capture_default_str();
    random->add_option("--density", random_options.density, "edge density in (0, 1]")->capture_default_str();
    random->add_option("--bsccs", random_options.bscc_count, "bottom SCC count")->capture_default_str();
    random->add_option("--max-bscc-size", random_options.max_bscc_size, "largest BSCC")->capture_default_str();
    random->add_flag("--ctmc", random_options.continuous_time, "draw exit rates");
    random->add_flag("--reward", random_options.with_reward, "add reward structure r");
    random->add_option("-o,--output", output, "output file (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }

    try {
        if (!threads) {
            if (const char* env = std::getenv("EVTKIT_THREADS")) threads = std::stoi(env);
        }
        if (threads) {
            if (*threads < 1) throw evtkit::ConfigError("thread count must be positive");
            evtkit::kernels::parallel::set_max_threads(*threads);
        }
        if (*evt) return dispatch(c, [&](auto tag) { return run_evt<decltype(tag)>(c); });
        if (*stationary) return dispatch(c, [&](auto tag) { return run_stationary<decltype(tag)>(c); });
        if (*condrew) return dispatch(c, [&](auto tag) { return run_condrew<decltype(tag)>(c); });
        if (*graph) return run_analyze_graph(c);
        if (*fdr) {
            write_output(output, evtkit::serialize_model(evtkit::oracle::generate_fdr(faces)));
            return 0;
        }
        if (*random) {
            write_output(output, evtkit::serialize_model(evtkit::oracle::generate_random_chain(seed, random_options)));
            return 0;
        }
    } catch (const evtkit::ModelError& e) {
        std::cerr << "model error: " << e.what() << '\n';
        return 1;
    } catch (const evtkit::ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return 1;
    } catch (const evtkit::SolverError& e) {
        std::cerr << "solver error: " << e.what() << '\n';
        return 2;
    } catch (const evtkit::QueryError& e) {
        std::cerr << "query error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
