// Command line front end.  Subcommands:
//
//   check FILE       validate a derivation file and print its rule counts
//   flow FILE        extract the atomic flow of a valid derivation
//   stats FILE       line, size and rule statistics of a derivation
//   theta            build a threshold formula
//   gamma            build one threshold ladder derivation
//   simple FILE      bring a proof into simple form
//   cutfree FILE     eliminate the cuts of a proof
//   analytic FILE    remove the coweakenings of a cut-free proof
//   normalise FILE   full pipeline; --report writes the per-stage CSV
//   gen              write reproducible random proof files with cuts
//
// Derivation files are the JSON serialization; --format selects text, json
// or (for flows) dot output.  Exit codes: 0 success, 1 the input fails a
// check or a stage rejects it, 2 usage or parse errors.

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "sks/corpus.hpp"
#include "sks/normalise.hpp"
#include "sks/serialize.hpp"

namespace {

// Input problems that should exit 2 rather than 1.
struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

nlohmann::json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot read " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(path + ": " + e.what());
    }
    return j;
}

// Loads and fully validates a derivation file; prints the failure report and
// returns nullopt when the checker rejects it.
std::optional<sks::Derivation> load_checked(const std::string& path) {
    nlohmann::json j = read_json(path);
    sks::Derivation d;
    try {
        d = sks::derivation_from_json(j);
    } catch (const std::runtime_error& e) {
        throw InputError(e.what());
    }
    sks::CheckReport rep = sks::check_derivation(d);
    if (!rep.valid) {
        for (const auto& [step, what] : rep.failures)
            std::cerr << path << ": step " << step << ": " << what << "\n";
        return std::nullopt;
    }
    if (!sks::verify_traces(d, j)) {
        std::cerr << path << ": stored occurrence traces do not match the derivation\n";
        return std::nullopt;
    }
    return d;
}

sks::AtomVector make_atoms(int n, const std::string& atoms_flag) {
    sks::AtomVector v;
    if (!atoms_flag.empty()) {
        size_t start = 0;
        while (start <= atoms_flag.size()) {
            size_t comma = atoms_flag.find(',', start);
            std::string name = atoms_flag.substr(
                start, comma == std::string::npos ? std::string::npos : comma - start);
            if (name.empty() || name[0] < 'a' || name[0] > 'z')
                throw InputError("--atoms: bad atom name '" + name + "'");
            v.push_back(sks::Literal{sks::AtomTable::instance().id(name), false});
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (n > 0 && n != static_cast<int>(v.size()))
            throw InputError("-n disagrees with the --atoms list");
        return v;
    }
    if (n <= 0) throw InputError("give -n or --atoms");
    for (int i = 1; i <= n; ++i)
        v.push_back(
            sks::Literal{sks::AtomTable::instance().id("a" + std::to_string(i)), false});
    return v;
}

size_t memo_limit_from_env() {
    const char* s = std::getenv("SKS_MEMO_LIMIT");
    if (!s || !*s) return 0;
    char* end = nullptr;
    unsigned long long v = std::strtoull(s, &end, 10);
    if (end == s || *end) throw InputError("SKS_MEMO_LIMIT must be a number");
    return static_cast<size_t>(v);
}

void print_rules(std::ostream& out, const std::map<sks::RuleId, uint64_t>& counts) {
    bool first = true;
    for (const auto& [rule, count] : counts) {
        out << (first ? "" : ", ") << sks::rule_name(rule) << " x" << count;
        first = false;
    }
    out << "\n";
}

nlohmann::json rules_json(const std::map<sks::RuleId, uint64_t>& counts) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [rule, count] : counts) j[sks::rule_ascii(rule)] = count;
    return j;
}

void emit_derivation(const sks::Derivation& d, const std::string& format) {
    if (format == "json")
        std::cout << sks::derivation_to_json(d).dump(2) << "\n";
    else if (format == "text")
        std::cout << sks::render_text(d);
    else
        throw InputError("--format " + format + " does not apply to derivations");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"deep-inference proofs in system SKS: check, flows, thresholds, "
                 "normalisation"};
    app.require_subcommand(1);
    std::string format = "text";
    app.add_option("--format", format, "output format")
        ->check(CLI::IsMember({"text", "json", "dot"}))
        ->capture_default_str();

    std::string in_path, report_path, atoms_flag, out_dir = ".";
    int k = -1, l = -1, n = 0, count = 1;
    uint64_t seed = 0;
    sks::CorpusOptions copt;

    CLI::App* c_check = app.add_subcommand("check", "validate a derivation file");
    c_check->fallthrough();
    c_check->add_option("file", in_path, "derivation file")->required();

    CLI::App* c_flow = app.add_subcommand("flow", "extract the atomic flow");
    c_flow->fallthrough();
    c_flow->add_option("file", in_path, "derivation file")->required();

    CLI::App* c_stats = app.add_subcommand("stats", "derivation statistics");
    c_stats->fallthrough();
    c_stats->add_option("file", in_path, "derivation file")->required();

    CLI::App* c_theta = app.add_subcommand("theta", "threshold formula");
    c_theta->fallthrough();
    c_theta->add_option("-k", k, "threshold level")->required();
    c_theta->add_option("-n", n, "number of atoms a1..an");
    c_theta->add_option("--atoms", atoms_flag, "comma-separated atom names");

    CLI::App* c_gamma = app.add_subcommand("gamma", "threshold ladder derivation");
    c_gamma->fallthrough();
    c_gamma->add_option("-k", k, "threshold level")->required();
    c_gamma->add_option("-l", l, "atom index, 1-based")->required();
    c_gamma->add_option("-n", n, "number of atoms a1..an");
    c_gamma->add_option("--atoms", atoms_flag, "comma-separated atom names");

    CLI::App* c_simple = app.add_subcommand("simple", "bring a proof into simple form");
    c_simple->fallthrough();
    c_simple->add_option("file", in_path, "proof file")->required();

    CLI::App* c_cutfree = app.add_subcommand("cutfree", "eliminate cuts");
    c_cutfree->fallthrough();
    c_cutfree->add_option("file", in_path, "proof file")->required();

    CLI::App* c_analytic = app.add_subcommand("analytic", "remove coweakenings");
    c_analytic->fallthrough();
    c_analytic->add_option("file", in_path, "cut-free proof file")->required();

    CLI::App* c_norm = app.add_subcommand("normalise", "full pipeline to analytic form");
    c_norm->fallthrough();
    c_norm->add_option("file", in_path, "proof file")->required();
    c_norm->add_option("--report", report_path, "write the per-stage CSV here");

    CLI::App* c_gen = app.add_subcommand("gen", "generate random proofs with cuts");
    c_gen->fallthrough();
    c_gen->add_option("--seed", seed, "generator seed")->capture_default_str();
    c_gen->add_option("--count", count, "number of proofs")->capture_default_str();
    c_gen->add_option("-n", copt.atoms, "atom pool size")->capture_default_str();
    c_gen->add_option("--max-leaves", copt.max_leaves, "line width cap")
        ->capture_default_str();
    c_gen->add_option("--growth-steps", copt.growth_steps, "growth iterations")
        ->capture_default_str();
    c_gen->add_option("--out", out_dir, "output directory")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (app.got_subcommand(c_check)) {
            auto d = load_checked(in_path);
            if (!d) return 1;
            sks::CheckReport rep = sks::check_derivation(*d);
            if (format == "json") {
                nlohmann::json j{{"valid", true},
                                 {"steps", d->steps.size()},
                                 {"size", rep.size},
                                 {"rules", rules_json(rep.rule_counts)}};
                std::cout << j.dump(2) << "\n";
            } else {
                std::cout << "valid: " << d->steps.size() << " steps, size " << rep.size
                          << "\n";
                print_rules(std::cout, rep.rule_counts);
            }
        } else if (app.got_subcommand(c_flow)) {
            auto d = load_checked(in_path);
            if (!d) return 1;
            auto [fl, occ] = sks::extract_flow(*d);
            if (format == "dot") {
                std::cout << sks::flow_to_dot(fl);
            } else if (format == "json") {
                std::cout << sks::flow_to_json(fl).dump(2) << "\n";
            } else {
                std::map<std::string, uint64_t> kinds;
                for (const sks::Vertex& v : fl.vertices)
                    ++kinds[sks::vertex_kind_name(v.kind)];
                std::cout << "vertices: " << fl.vertices.size();
                for (const auto& [name, cnt] : kinds) std::cout << ", " << name << " x" << cnt;
                std::cout << "\nedges: " << fl.edges.size()
                          << "\ncomponents: " << sks::components(fl).size() << "\n";
            }
        } else if (app.got_subcommand(c_stats)) {
            auto d = load_checked(in_path);
            if (!d) return 1;
            sks::CheckReport rep = sks::check_derivation(*d);
            if (format == "json") {
                nlohmann::json j{{"steps", d->steps.size()},
                                 {"size", rep.size},
                                 {"size_modulo_eq", sks::size_modulo_eq(*d)},
                                 {"premiss", sks::render(d->premiss)},
                                 {"conclusion", sks::render(d->conclusion())},
                                 {"is_proof", sks::is_proof(*d)},
                                 {"rules", rules_json(rep.rule_counts)}};
                std::cout << j.dump(2) << "\n";
            } else {
                std::cout << "steps: " << d->steps.size() << "\nsize: " << rep.size
                          << "\nsize modulo =: " << sks::size_modulo_eq(*d)
                          << "\npremiss: " << sks::render(d->premiss)
                          << "\nconclusion: " << sks::render(d->conclusion())
                          << "\nproof: " << (sks::is_proof(*d) ? "yes" : "no") << "\nrules: ";
                print_rules(std::cout, rep.rule_counts);
            }
        } else if (app.got_subcommand(c_theta)) {
            sks::ThresholdBuilder tb(make_atoms(n, atoms_flag), memo_limit_from_env());
            sks::Formula th = tb.theta(static_cast<uint32_t>(k));
            if (format == "json") {
                nlohmann::json j{{"k", k},
                                 {"n", tb.atoms().size()},
                                 {"formula", sks::render(th)},
                                 {"size", sks::size(th)}};
                std::cout << j.dump(2) << "\n";
            } else if (format == "text") {
                std::cout << sks::render(th) << "\n";
            } else {
                throw InputError("--format dot applies to flows only");
            }
        } else if (app.got_subcommand(c_gamma)) {
            sks::ThresholdBuilder tb(make_atoms(n, atoms_flag), memo_limit_from_env());
            emit_derivation(tb.gamma(static_cast<uint32_t>(k), static_cast<uint32_t>(l)),
                            format);
        } else if (app.got_subcommand(c_simple)) {
            auto d = load_checked(in_path);
            if (!d) return 1;
            emit_derivation(sks::to_simple_form(*d).proof, format);
        } else if (app.got_subcommand(c_cutfree)) {
            auto d = load_checked(in_path);
            if (!d) return 1;
            emit_derivation(sks::to_cut_free(*d), format);
        } else if (app.got_subcommand(c_analytic)) {
            auto d = load_checked(in_path);
            if (!d) return 1;
            emit_derivation(sks::to_analytic(*d), format);
        } else if (app.got_subcommand(c_norm)) {
            auto d = load_checked(in_path);
            if (!d) return 1;
            sks::NormaliseResult r = sks::normalise(*d);
            if (!report_path.empty()) {
                std::ofstream out(report_path);
                if (!out) throw InputError("cannot write " + report_path);
                out << r.report.csv();
            }
            emit_derivation(r.analytic, format);
        } else if (app.got_subcommand(c_gen)) {
            if (count < 1) throw InputError("--count must be at least 1");
            std::mt19937_64 rng(seed);
            for (int i = 0; i < count; ++i) {
                sks::Derivation d = sks::random_proof_with_cut(rng, copt);
                std::string path = out_dir + "/proof_" + std::to_string(seed) + "_" +
                                   std::to_string(i) + ".sks";
                std::ofstream out(path);
                if (!out) throw InputError("cannot write " + path);
                out << sks::derivation_to_json(d).dump(2) << "\n";
                std::cout << path << "\n";
            }
        }
    } catch (const InputError& e) {
        std::cerr << "sks: " << e.what() << "\n";
        return 2;
    } catch (const sks::ParseError& e) {
        std::cerr << "sks: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "sks: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
