// hgo: certify, simulate and demo driver for high-gain observers with delays.
//
// Exit codes: 0 ok, 1 config / parse error, 2 infeasible, 3 integration failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "hgo/hgo.hpp"

namespace {

using nlohmann::json;

enum Exit { kOk = 0, kConfig = 1, kInfeasible = 2, kIntegration = 3 };

constexpr const char* kCsvHelp =
    "CSV columns: t, x1..xn, xhat1..xhatn, e_norm, eta_norm, envelope, radius\n"
    "  envelope = coef*exp(-rate*t) (decaying part), radius = practical radius (0 in exponential mode).\n"
    "  gnuplot: plot 'out.csv' using 1:(column('e_norm')) with lines";

void print_json(const json& j) { std::cout << j.dump(2) << '\n'; }

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw hgo::ConfigError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct SweepSpec {
    double lo = 0.0;
    double hi = 0.0;
    int count = 0;
};

SweepSpec parse_sweep(const std::string& text) {
    SweepSpec s;
    char tail = 0;
    if (text.rfind("eps=", 0) != 0 ||
        std::sscanf(text.c_str() + 4, "%lf:%lf:%d%c", &s.lo, &s.hi, &s.count, &tail) != 3 || s.count < 1 ||
        !(s.lo > 0.0) || !(s.hi >= s.lo))
        throw hgo::ConfigError("bad --sweep value '" + text + "', expected eps=a:b:k with 0<a<=b, k>=1");
    return s;
}

json sweep_point(hgo::RunConfig cfg, double eps) {
    cfg.eps = eps;
    json j{{"eps", eps}};
    try {
        const auto out = hgo::certify_config(cfg);
        j["feasible"] = true;
        j["condition_lhs"] = out.certificate.condition_lhs;
        j["sigma"] = out.certificate.sigma;
        j["envelope_coef"] = out.certificate.envelope_coef;
        j["envelope_rate"] = out.certificate.envelope_rate;
        if (out.certificate.mode == hgo::StabilityMode::Practical) j["radius"] = out.certificate.radius;
    } catch (const hgo::InfeasibleError& e) {
        j["feasible"] = false;
        j["reason"] = e.what();
    } catch (const hgo::IntegrationError& e) {
        j["feasible"] = false;
        j["reason"] = std::string("integration: ") + e.what();
    }
    return j;
}

int cmd_certify(const std::string& path, const std::string& sweep) {
    const auto cfg = hgo::load_config(path);
    if (sweep.empty()) {
        print_json(hgo::certification_to_json(hgo::certify_config(cfg)));
        return kOk;
    }
    hgo::require_valid(cfg);
    const auto spec = parse_sweep(sweep);
    std::vector<std::future<json>> jobs;
    for (int k = 0; k < spec.count; ++k) {
        const double eps = spec.count == 1 ? spec.lo : spec.lo + (spec.hi - spec.lo) * k / (spec.count - 1);
        jobs.push_back(std::async(std::launch::async, sweep_point, cfg, eps));
    }
    json points = json::array();
    bool any = false;
    for (auto& f : jobs) {
        points.push_back(f.get());
        any = any || points.back()["feasible"].get<bool>();
    }
    print_json({{"sweep", points}});
    return any ? kOk : kInfeasible;
}

int write_simulation(const hgo::SimulationOutcome& out, const std::string& csv_path) {
    std::ofstream csv(csv_path, std::ios::binary);
    if (!csv) throw hgo::ConfigError("cannot write " + csv_path);
    hgo::write_trajectory_csv(csv, out.result, out.certification ? &out.certification->certificate : nullptr);
    return out.result.trajectory.failure() ? kIntegration : kOk;
}

int cmd_simulate(const std::string& path, const std::string& csv_path, bool force, const std::string& summary_path) {
    const auto cfg = hgo::load_config(path);
    const auto out = hgo::simulate_config(cfg, force);
    const int code = write_simulation(out, csv_path);
    const auto summary = hgo::simulation_summary(out);
    if (!summary_path.empty()) {
        std::ofstream s(summary_path);
        if (!s) throw hgo::ConfigError("cannot write " + summary_path);
        s << summary.dump(2) << '\n';
    }
    print_json(summary);
    if (code != kOk) std::cerr << "integration failed: " << *out.result.trajectory.failure() << '\n';
    return code;
}

json lyapunov_json(const hgo::LyapunovSolution& s) {
    return {{"convention", hgo::to_string(s.convention)},
            {"P", hgo::matrix_to_json(s.P)},
            {"eigenvalues", hgo::symmetric_eigenvalues(s.P)},
            {"lambda_min", s.lambda_min},
            {"lambda_max", s.lambda_max},
            {"residual", s.residual}};
}

int cmd_demo(const std::string& out_dir) {
    namespace fs = std::filesystem;
    const auto cfg = hgo::polar_molecule_config();
    const auto out = hgo::simulate_config(cfg);
    const auto& cert = out.certification->certificate;

    json comparison;
    for (auto conv : {hgo::LyapunovConvention::AsWritten, hgo::LyapunovConvention::Transposed})
        comparison["lyapunov"].push_back(lyapunov_json(hgo::design_lyapunov(cfg.gain, conv)));
    const auto g = hgo::gamma_eval(cfg.system.gamma, cert.eps, cfg.system.n);
    for (auto variant : {hgo::Condition2Variant::Paper, hgo::Condition2Variant::Strict}) {
        auto problem = hgo::feasibility_problem(cfg, out.certification->lyapunov);
        problem.variant = variant;
        const auto range = hgo::find_epsilon_range(problem, cfg.eps_max, 1e-6);
        comparison["condi2"].push_back(
            json{{"variant", hgo::to_string(variant)},
             {"lhs_at_eps",
              hgo::condition2_lhs(cert.lambda_min, cert.lambda_max, cfg.system.n, g.gamma1, g.gamma2, cert.eps,
                                  cfg.delay.beta(), variant)},
             {"eps_star", range.eps_star ? json(*range.eps_star) : json(nullptr)},
             {"recommended_eps", range.recommended_eps}});
    }

    fs::create_directories(out_dir);
    auto cert_json = hgo::certification_to_json(*out.certification);
    cert_json["comparison"] = comparison;
    cert_json["envelope_check"] = hgo::simulation_summary(out);
    cert_json["envelope_check"].erase("certificate");
    {
        std::ofstream f(fs::path(out_dir) / "demo_certificate.json");
        f << cert_json.dump(2) << '\n';
    }
    const int code = write_simulation(out, (fs::path(out_dir) / "demo_trajectory.csv").string());

    std::printf("Lyapunov solutions for L = [-5, -5]:\n");
    for (const auto& s : comparison["lyapunov"]) {
        const auto& p = s["P"];
        std::printf("  %-10s P = [[%.6g, %.6g], [%.6g, %.6g]]  eig = {%.4f, %.4f}  residual %.2e\n",
                    s["convention"].get<std::string>().c_str(), p[0][0].get<double>(), p[0][1].get<double>(),
                    p[1][0].get<double>(), p[1][1].get<double>(), s["eigenvalues"][0].get<double>(),
                    s["eigenvalues"][1].get<double>(), s["residual"].get<double>());
    }
    std::printf("condi2 at eps = %g:\n", cert.eps);
    for (const auto& c : comparison["condi2"])
        std::printf("  %-6s LHS = %.6g  eps* = %s\n", c["variant"].get<std::string>().c_str(),
                    c["lhs_at_eps"].get<double>(), c["eps_star"].dump().c_str());
    std::printf("certificate (%s): sigma = %.6g  coef = %.6g  rate = %.6g  radius = %.6g  nu = %.6g (%s)\n",
                hgo::to_string(cert.mode), cert.sigma, cert.envelope_coef, cert.envelope_rate, cert.radius, cert.nu,
                out.certification->nu_source.c_str());
    const bool pass = out.envelope && out.envelope->pass && code == kOk;
    std::printf("envelope check: %s (min margin %.6g, %zu rows)\n", pass ? "pass" : "FAIL",
                out.envelope ? out.envelope->min_margin : 0.0, out.result.trajectory.size());
    std::printf("wrote %s and %s\n", (fs::path(out_dir) / "demo_certificate.json").string().c_str(),
                (fs::path(out_dir) / "demo_trajectory.csv").string().c_str());
    if (code != kOk) return code;
    return pass ? kOk : kIntegration;
}

hgo::Matrix read_matrix(const std::string& path) {
    std::istringstream in(read_file(path));
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        for (char& ch : line)
            if (ch == ',' || ch == ';' || ch == '[' || ch == ']') ch = ' ';
        std::istringstream ls(line);
        std::vector<double> row;
        std::string tok;
        while (ls >> tok) {
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(tok, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != tok.size()) throw hgo::ConfigError("bad matrix entry '" + tok + "' in " + path);
            row.push_back(v);
        }
        if (!row.empty()) rows.push_back(std::move(row));
    }
    for (const auto& r : rows)
        if (r.size() != rows.size()) throw hgo::ConfigError("matrix in " + path + " is not square");
    if (rows.empty()) throw hgo::ConfigError("empty matrix file " + path);
    hgo::Matrix m(rows.size(), rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows.size(); ++j) m(i, j) = rows[i][j];
    return m;
}

int cmd_lyap(const std::vector<double>& gain, const std::string& matrix_path, const std::string& convention) {
    const auto conv =
        convention == "transposed" ? hgo::LyapunovConvention::Transposed : hgo::LyapunovConvention::AsWritten;
    hgo::LyapunovSolution s;
    json j;
    if (!matrix_path.empty()) {
        s = hgo::solve_lyapunov(read_matrix(matrix_path), conv);
    } else {
        const bool hurwitz = hgo::is_hurwitz(hgo::companion_char_poly(gain));
        j["hurwitz"] = hurwitz;
        if (!hurwitz) throw hgo::InfeasibleError("A_L not Hurwitz");
        s = hgo::solve_lyapunov(hgo::observer_error_matrix(gain), conv);
    }
    j.update(lyapunov_json(s));
    print_json(j);
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"High-gain observer certification and simulation for delayed triangular systems"};
    app.require_subcommand(1);
    app.footer(kCsvHelp);

    std::string config, csv_path, summary_path, sweep, out_dir = ".", matrix_path, convention = "as_written";
    bool force = false;
    std::vector<double> gain;

    auto* certify = app.add_subcommand("certify", "print the stability certificate of a config as JSON");
    certify->add_option("config", config, "JSON run configuration")->required();
    certify->add_option("--sweep", sweep, "certify at k evenly spaced eps values: eps=a:b:k");

    auto* simulate = app.add_subcommand("simulate", "simulate plant and observer, write CSV and summary");
    simulate->add_option("config", config, "JSON run configuration")->required();
    simulate->add_option("output", csv_path, "trajectory CSV path")->required();
    simulate->add_flag("--force", force, "simulate at the configured eps even if it is not certified");
    simulate->add_option("--summary", summary_path, "also write the summary JSON to this file");
    simulate->footer(kCsvHelp);

    auto* demo = app.add_subcommand("demo", "run the bundled polar-molecule example end to end");
    demo->add_option("--out-dir", out_dir, "directory for demo_certificate.json and demo_trajectory.csv");

    auto* lyap = app.add_subcommand("lyap", "solve the observer Lyapunov equation");
    auto* gain_opt = lyap->add_option("--gain", gain, "observer gain l1,...,ln")->delimiter(',');
    auto* matrix_opt = lyap->add_option("--matrix", matrix_path, "file with a square matrix A_L, one row per line");
    gain_opt->excludes(matrix_opt);
    lyap->add_option("--convention", convention, "as_written (A^T P + P A = -I) or transposed")
        ->check(CLI::IsMember({"as_written", "transposed"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kConfig;
    }

    try {
        if (*certify) return cmd_certify(config, sweep);
        if (*simulate) return cmd_simulate(config, csv_path, force, summary_path);
        if (*demo) return cmd_demo(out_dir);
        if (*lyap) {
            if (gain.empty() && matrix_path.empty()) throw hgo::ConfigError("lyap needs --gain or --matrix");
            return cmd_lyap(gain, matrix_path, convention);
        }
    } catch (const hgo::ConfigError& e) {
        std::cerr << e.what() << '\n';
        return kConfig;
    } catch (const hgo::ParseError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const hgo::EvalError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const hgo::InfeasibleError& e) {
        std::cerr << "infeasible: " << e.what() << '\n';
        return kInfeasible;
    } catch (const hgo::LinalgError& e) {
        std::cerr << "infeasible: " << e.what() << '\n';
        return kInfeasible;
    } catch (const hgo::IntegrationError& e) {
        std::cerr << "integration failed: " << e.what() << '\n';
        return kIntegration;
    } catch (const hgo::DdeError& e) {
        std::cerr << "integration failed: " << e.what() << '\n';
        return kIntegration;
    }
    return kConfig;
}
