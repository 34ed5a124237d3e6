// Command-line front end: argument parsing only; the commands live in
// the header library so they stay testable in-process.

#include <charconv>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ncint/ncint.hpp"

namespace {

bool parse_point(const std::string& text, std::vector<double>& out) {
    out.clear();
    size_t pos = 0;
    while (pos <= text.size()) {
        size_t comma = text.find(',', pos);
        std::string item = text.substr(pos, comma == std::string::npos ? std::string::npos
                                                                       : comma - pos);
        size_t b = item.find_first_not_of(" \t");
        size_t e = item.find_last_not_of(" \t");
        if (b == std::string::npos) return false;
        item = item.substr(b, e - b + 1);
        double v = 0.0;
        auto res = std::from_chars(item.data(), item.data() + item.size(), v);
        if (res.ec != std::errc() || res.ptr != item.data() + item.size()) return false;
        out.push_back(v);
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return !out.empty();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"chart-level verification of integrability hypotheses and fiber topology"};
    app.require_subcommand(1);

    ncint::cli::RunConfig cfg;
    std::string x0_text;
    std::string f_text, g_text;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--system", cfg.system_file, "path to a system definition file");
        cmd->add_option("--builtin", cfg.builtin, "name of a built-in system");
        cmd->add_option("--seed", cfg.seed, "seed for sample-point generation");
        cmd->add_option("--points", cfg.points, "number of sample points");
        cmd->add_option("--out", cfg.out_path, "write the payload to this file");
        cmd->add_option("--format", cfg.format, "output format (json or csv where supported)");
        cmd->add_option("--tol-flow", cfg.tol_flow, "local error tolerance for flows");
    };

    CLI::App* verify = app.add_subcommand("verify", "run the hypothesis checks");
    add_common(verify);
    verify->add_option("--tol-closure", cfg.tol_closure, "fiber-constancy drift tolerance");
    verify->add_option("--tol-isotropy", cfg.tol_isotropy, "isotropy tolerance");

    CLI::App* bracket = app.add_subcommand("bracket", "bracket of two chart expressions");
    add_common(bracket);
    bracket->add_option("f", f_text, "first expression (H1..Hk name the integrals)")
        ->required();
    bracket->add_option("g", g_text, "second expression")->required();

    CLI::App* flow = app.add_subcommand("flow", "integrate one Hamiltonian flow");
    add_common(flow);
    flow->add_option("--field", cfg.field,
                     "direction: integral:<i>, casimir:<i>, or expr:<expression>");
    flow->add_option("--t-end", cfg.t_end, "integration horizon");
    flow->add_option("--x0", x0_text, "initial point, comma-separated")->required();

    CLI::App* classify = app.add_subcommand("classify", "classify the invariant fiber");
    add_common(classify);
    classify->add_option("--t-max", cfg.t_max, "recurrence scan horizon");
    classify->add_option("--eps", cfg.eps, "recurrence distance threshold");
    classify->add_option("--x0", x0_text, "initial point, comma-separated")->required();

    CLI::App* canon = app.add_subcommand("canonicalize", "echo a system in canonical form");
    add_common(canon);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    if (!x0_text.empty() && !parse_point(x0_text, cfg.x0)) {
        std::cerr << "error: malformed --x0 (expected comma-separated numbers)\n";
        return 2;
    }

    if (verify->parsed()) return ncint::cli::cmd_verify(cfg, std::cout, std::cerr);
    if (bracket->parsed())
        return ncint::cli::cmd_bracket(cfg, f_text, g_text, std::cout, std::cerr);
    if (flow->parsed()) return ncint::cli::cmd_flow(cfg, std::cout, std::cerr);
    if (classify->parsed()) return ncint::cli::cmd_classify(cfg, std::cout, std::cerr);
    if (canon->parsed()) return ncint::cli::cmd_canonicalize(cfg, std::cout, std::cerr);
    std::cerr << "error: no command\n";
    return 2;
}
