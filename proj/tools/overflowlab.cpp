// Command-line front end: validate networks, compute exact overflow
// probabilities, run the splitting estimator and the naive baseline, and
// produce the scaling reports.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "overflowlab/overflowlab.hpp"

namespace ol = overflowlab;

namespace {

std::vector<int> parse_int_list(const std::string& text, const std::string& what) {
    std::vector<int> out;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            std::size_t pos = 0;
            int v = std::stoi(tok, &pos);
            ol::require(pos == tok.size() && v >= 0, ol::Errc::BadArgument,
                        what + " entries must be non-negative integers, got \"" + tok + "\"");
            out.push_back(v);
        } catch (const ol::Error&) {
            throw;
        } catch (...) {
            ol::fail(ol::Errc::BadArgument,
                     what + " entries must be non-negative integers, got \"" + tok + "\"");
        }
    }
    ol::require(!out.empty(), ol::Errc::BadArgument, what + " must not be empty");
    return out;
}

std::vector<int> resolve_target(const std::string& text, std::size_t d) {
    if (text.empty()) return std::vector<int>(d, 1); // total population by default
    auto v = parse_int_list(text, "--target");
    ol::require(v.size() == d, ol::Errc::BadArgument,
                "--target must list one 0/1 entry per station");
    return v;
}

ol::State resolve_state(const std::string& text, std::size_t d) {
    if (text.empty()) return ol::State(d, 0);
    auto x = parse_int_list(text, "--x0");
    ol::require(x.size() == d, ol::Errc::BadArgument,
                "--x0 must list one count per station");
    return x;
}

std::string g9(double v) { return ol::format_g9(v); }

// Every writer funnels through one stream so --out behaves uniformly.
struct Output {
    std::ofstream file;
    std::ostream* os = &std::cout;
    void open(const std::string& path) {
        if (path.empty()) return;
        file.open(path, std::ios::binary);
        ol::require(file.good(), ol::Errc::BadArgument, path + ": cannot open for writing");
        os = &file;
    }
    std::ostream& stream() { return *os; }
};

int cmd_validate(const std::string& network_path, bool csv, Output& out) {
    std::string name;
    ol::ValidatedNetwork vn = ol::validate(ol::load_network(network_path, &name));
    std::ostream& os = out.stream();
    if (csv) {
        os << "station,lambda,mu,phi,rho,weight\n";
        for (std::size_t i = 0; i < vn.d(); ++i)
            os << (i + 1) << ',' << g9(vn.spec.lambda[i]) << ',' << g9(vn.spec.mu[i]) << ','
               << g9(vn.phi[i]) << ',' << g9(vn.rho[i]) << ',' << g9(vn.potential_weights[i])
               << '\n';
        os << "# rho_star," << g9(vn.rho_star) << ",beta," << vn.beta << '\n';
    } else {
        os << "network " << (name.empty() ? network_path : name) << " with " << vn.d()
           << " station(s), rates normalized\n";
        os << "station      lambda          mu         phi         rho      weight\n";
        for (std::size_t i = 0; i < vn.d(); ++i) {
            os << "  " << (i + 1);
            for (double val : {vn.spec.lambda[i], vn.spec.mu[i], vn.phi[i], vn.rho[i],
                               vn.potential_weights[i]}) {
                std::string s = g9(val);
                os << std::string(s.size() < 12 ? 12 - s.size() : 1, ' ') << s;
            }
            os << '\n';
        }
        os << "rho* = " << g9(vn.rho_star) << ", beta = " << vn.beta << '\n';
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"overflow probabilities in open Jackson networks"};
    app.require_subcommand(1);

    std::string network_path, target_text, x0_text, out_path, nlist_text;
    int n = 0, r = 2;
    std::uint64_t m = 0, seed = 0;
    unsigned threads = 1;
    double tol = 1e-9;
    bool csv = false;

    auto add_common = [&](CLI::App* cmd, bool needs_network = true) {
        if (needs_network)
            cmd->add_option("--network", network_path, "network JSON file")->required();
        cmd->add_flag("--csv", csv, "machine-readable CSV output");
        cmd->add_option("--out", out_path, "write output to this file instead of stdout");
    };

    CLI::App* c_validate = app.add_subcommand("validate", "check a network and print its traffic quantities");
    add_common(c_validate);

    CLI::App* c_exact = app.add_subcommand("exact", "overflow probability from the first-passage linear system");
    add_common(c_exact);
    c_exact->add_option("--n", n, "overflow level")->required();
    c_exact->add_option("--target", target_text, "binary station list, e.g. 1,1 (default all ones)");
    c_exact->add_option("--x0", x0_text, "start state (default origin)");
    c_exact->add_option("--tol", tol, "relative tolerance for truncation control");

    CLI::App* c_split = app.add_subcommand("split", "multilevel splitting estimate");
    add_common(c_split);
    c_split->add_option("--n", n, "overflow level")->required();
    c_split->add_option("--target", target_text, "binary station list (default all ones)");
    c_split->add_option("--x0", x0_text, "start state (default origin)");
    c_split->add_option("--r", r, "splitting factor");
    c_split->add_option("--m", m, "replications")->required();
    c_split->add_option("--seed", seed, "master seed")->required();
    c_split->add_option("--threads", threads, "worker threads");

    CLI::App* c_mc = app.add_subcommand("mc", "naive Monte Carlo estimate");
    add_common(c_mc);
    c_mc->add_option("--n", n, "overflow level")->required();
    c_mc->add_option("--target", target_text, "binary station list (default all ones)");
    c_mc->add_option("--x0", x0_text, "start state (default origin)");
    c_mc->add_option("--m", m, "replications")->required();
    c_mc->add_option("--seed", seed, "master seed")->required();
    c_mc->add_option("--threads", threads, "worker threads");

    CLI::App* c_scaling = app.add_subcommand("scaling", "splitting complexity study over a grid of levels");
    add_common(c_scaling);
    c_scaling->add_option("--n-list", nlist_text, "comma-separated increasing levels, e.g. 10,15,20,25,30")
        ->required();
    c_scaling->add_option("--target", target_text, "binary station list (default all ones)");
    c_scaling->add_option("--x0", x0_text, "start state (default origin)");
    c_scaling->add_option("--r", r, "splitting factor");
    c_scaling->add_option("--m", m, "replications per level")->required();
    c_scaling->add_option("--seed", seed, "master seed")->required();
    c_scaling->add_option("--threads", threads, "worker threads");

    CLI::App* c_check = app.add_subcommand("check", "self-diagnostics: subsolution, reversed kernel, regeneration");
    add_common(c_check);
    c_check->add_option("--n", n, "level for the regeneration identity (default 4)");
    c_check->add_option("--target", target_text, "binary station list (default all ones)");
    c_check->add_option("--seed", seed, "seed for sampling interior states (default 1)");

    CLI11_PARSE(app, argc, argv);

    try {
        Output out;
        out.open(out_path);
        std::ostream& os = out.stream();

        if (c_validate->parsed()) return cmd_validate(network_path, csv, out);

        std::string name;
        ol::ValidatedNetwork vn = ol::validate(ol::load_network(network_path, &name));
        std::vector<int> v = resolve_target(target_text, vn.d());

        if (c_exact->parsed()) {
            ol::State x0 = resolve_state(x0_text, vn.d());
            double p = ol::overflow_probability(vn, n, v, x0, tol);
            if (csv) {
                os << "n,probability\n" << n << ',' << g9(p) << '\n';
            } else {
                os << "overflow probability at n = " << n << " from start state ("
                   << [&] {
                          std::string s;
                          for (std::size_t i = 0; i < x0.size(); ++i)
                              s += (i ? "," : "") + std::to_string(x0[i]);
                          return s;
                      }()
                   << "): " << g9(p) << '\n';
            }
            return 0;
        }

        if (c_split->parsed() || c_mc->parsed()) {
            ol::State x0 = resolve_state(x0_text, vn.d());
            ol::ReplicationStats st;
            if (c_split->parsed()) {
                ol::TargetSpec target = ol::target_params(vn, v);
                ol::LevelScheme scheme = ol::build_levels(vn, target, n, r, x0);
                st = ol::estimate(vn, scheme, x0, m, seed, threads);
            } else {
                st = ol::naive_mc(vn, n, v, x0, m, seed, threads);
            }
            if (csv) {
                os << "mean,std_error,variance,cv2,mean_work,wncv2,m,seed\n";
                os << g9(st.mean) << ',' << g9(st.std_error) << ',' << g9(st.variance) << ','
                   << g9(st.cv2) << ',' << g9(st.mean_work) << ',' << g9(st.work_normalized_cv2)
                   << ',' << st.m << ',' << seed << '\n';
            } else {
                os << "estimate      " << g9(st.mean) << "\n"
                   << "std error     " << g9(st.std_error) << "\n"
                   << "cv^2          " << g9(st.cv2) << "\n"
                   << "mean work     " << g9(st.mean_work) << "\n"
                   << "wn cv^2       " << g9(st.work_normalized_cv2) << "\n"
                   << "replications  " << st.m << " (seed " << seed << ")\n";
            }
            return 0;
        }

        if (c_scaling->parsed()) {
            ol::State x0 = resolve_state(x0_text, vn.d());
            std::vector<int> n_list = parse_int_list(nlist_text, "--n-list");
            ol::TargetSpec target = ol::target_params(vn, v);
            ol::ScalingReport report =
                ol::scaling_study(vn, target, x0, n_list, r, m, seed, threads);
            if (csv) {
                ol::write_scaling_csv(report, os);
            } else {
                os << "scaling study, r = " << r << ", m = " << m << ", seed = " << seed << "\n";
                os << "   n     estimate        exact          cv2      mean_Nn    mean_work\n";
                for (const auto& row : report.rows) {
                    os << (row.n < 10 ? "   " : row.n < 100 ? "  " : " ") << row.n;
                    for (double val : {row.estimate, row.exact, row.cv2, row.mean_Nn, row.mean_work}) {
                        std::string s = std::isnan(val) ? std::string("-") : g9(val);
                        os << std::string(s.size() < 13 ? 13 - s.size() : 1, ' ') << s;
                    }
                    os << '\n';
                }
                auto fit_line = [&](const char* nm, const ol::FitResult& f, double tgt) {
                    os << nm << ": slope " << g9(f.slope) << " (theory " << g9(tgt)
                       << "), intercept " << g9(f.intercept) << ", R^2 " << g9(f.r_squared)
                       << '\n';
                };
                fit_line("mean_Nn  ", report.fit_mean_Nn, report.target_mean_Nn);
                fit_line("mean_work", report.fit_mean_work, report.target_mean_work);
                fit_line("cv2      ", report.fit_cv2, report.target_cv2);
                fit_line("wncv2    ", report.fit_wncv2, report.target_wncv2);
            }
            return 0;
        }

        if (c_check->parsed()) {
            ol::TargetSpec target = ol::target_params(vn, v);
            bool ok = true;
            const std::size_t d = vn.d();

            // Subsolution identity at randomly sampled interior states.
            ol::SplitMix64 rng(seed ? seed : 1);
            double worst_res = 0.0;
            for (int trial = 0; trial < 100; ++trial) {
                ol::State x(d);
                for (std::size_t i = 0; i < d; ++i)
                    x[i] = 1 + static_cast<int>(rng.u01() * 20.0);
                worst_res = std::max(worst_res,
                                     std::abs(ol::subsolution_residual(vn, target, x)));
            }
            bool sub_ok = worst_res <= 1e-12;
            ok = ok && sub_ok;
            os << "subsolution residual: max |psi| = " << g9(worst_res)
               << " over 100 interior states " << (sub_ok ? "[ok]" : "[FAIL]") << '\n';

            // Reversed kernel over the box {0..5}^d, against the closed form.
            ol::ValidatedNetwork rev = ol::validate(ol::reversed_network(vn));
            double worst_sum = 0.0, worst_entry = 0.0;
            std::vector<int> box(d, 0);
            for (;;) {
                ol::ReversedKernelRow row = ol::reversed_kernel_row(vn, box);
                double sum = 0.0;
                for (const auto& [x, p] : row.entries) sum += p;
                worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
                auto fwd = ol::kernel_row(rev, box);
                for (const auto& [x, p] : row.entries) {
                    double match = 0.0;
                    for (const auto& [y, q] : fwd)
                        if (y == x) match = q;
                    worst_entry = std::max(worst_entry, std::abs(p - match));
                }
                std::size_t i = 0;
                while (i < d && ++box[i] > 5) box[i++] = 0;
                if (i == d) break;
            }
            bool rev_ok = worst_sum <= 1e-12 && worst_entry <= 1e-12;
            ok = ok && rev_ok;
            os << "reversed kernel: max row-sum deviation " << g9(worst_sum)
               << ", max entry mismatch " << g9(worst_entry) << ' '
               << (rev_ok ? "[ok]" : "[FAIL]") << '\n';

            // Regeneration identity at one unit of target population.
            int check_n = n > 0 ? n : 4;
            ol::State x(d, 0);
            for (std::size_t i = 0; i < d; ++i)
                if (v[i] == 1) { x[i] = 1; break; }
            auto [lhs, rhs] = ol::regeneration_check(vn, check_n, v, x);
            bool reg_ok = std::abs(lhs - rhs) <= 1e-8;
            ok = ok && reg_ok;
            os << "regeneration identity (n=" << check_n << "): lhs " << g9(lhs) << ", rhs "
               << g9(rhs) << ", diff " << g9(std::abs(lhs - rhs)) << ' '
               << (reg_ok ? "[ok]" : "[FAIL]") << '\n';
            return ok ? 0 : 1;
        }
    } catch (const ol::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
