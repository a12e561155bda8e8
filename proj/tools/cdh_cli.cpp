// cdh: verification suites, kernel evaluation and dbar solves.
//
// Exit codes: 0 success, 1 a gating check failed, 2 usage or input error.

#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "cdh/suites.hpp"

namespace {

using namespace cdh;
using namespace cdh::suites;

constexpr int kOk = 0, kFail = 1, kUsage = 2;

// "a,b,c,d;e,f,g,h" -> n entries of 2^p reals each.
Vec parse_point(const std::string& text, int p, int n) {
  std::vector<double> x;
  std::string tok;
  for (char ch : text + ";") {
    if (ch == ',' || ch == ';') {
      if (tok.empty()) throw ParseError("empty coordinate in '" + text + "'");
      std::size_t used = 0;
      double v = 0;
      try {
        v = std::stod(tok, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != tok.size()) throw ParseError("bad coordinate '" + tok + "'");
      x.push_back(v);
      tok.clear();
    } else if (!std::isspace(static_cast<unsigned char>(ch))) {
      tok += ch;
    }
  }
  const std::size_t want = static_cast<std::size_t>((1 << p) * n);
  if (x.size() != want) throw DimensionMismatch("point needs " + std::to_string(want) + " coordinates, got " + std::to_string(x.size()));
  return from_real(p, x);
}

std::vector<double> flat(const Vec& v) { return to_real(v); }

void emit(const std::string& text, const std::string& out) {
  if (out.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(out);
  if (!f) throw ParseError("cannot write " + out);
  f << text;
}

std::string csv_path(const std::string& out) {
  const auto dot = out.find_last_of('.');
  const auto slash = out.find_last_of('/');
  if (dot != std::string::npos && (slash == std::string::npos || dot > slash)) return out.substr(0, dot) + ".csv";
  return out + ".csv";
}

struct Flags {
  std::string config, out, format;
  std::uint64_t seed = 0;
  double tol = 0;
  int nodes = 0, p = 0, n = 0;
  bool mc = false;
};

int verify(const std::string& suite, const Flags& fl, const CLI::App& sub) {
  Config cfg;
  if (!fl.config.empty()) apply_config_file(fl.config, cfg);
  if (sub.count("--seed")) cfg.seed = fl.seed;
  if (sub.count("--tol")) {
    if (fl.tol <= 0) throw ParseError("--tol must be positive");
    cfg.tol = fl.tol;
  }
  if (sub.count("--nodes")) cfg.nodes = fl.nodes;
  if (sub.count("--p")) cfg.p = fl.p;
  if (sub.count("--n")) cfg.n = fl.n;
  if (sub.count("--mc")) cfg.mc = fl.mc;
  if (sub.count("--out")) cfg.out = fl.out;
  if (sub.count("--format")) cfg.format = fl.format;

  Report r = run_suite(suite, cfg);
  const std::string js = r.to_json().dump(2) + "\n";
  if (!cfg.out.empty()) {
    emit(js, cfg.out);
    emit(r.to_csv(), csv_path(cfg.out));
  }
  std::cout << (cfg.format == "csv" ? r.to_csv() : js);
  for (const auto& c : r.checks)
    if (!c.pass && c.gating)
      std::cerr << "FAIL " << c.id << " [" << c.paper_ref << "] abs_error " << c.abs_error << " > tol " << c.tol << (c.note.empty() ? "" : " (" + c.note + ")")
                << "\n";
  return r.passed() ? kOk : kFail;
}

int eval_kernel(const std::string& kind, int p, int n, const std::string& zeta_s, const std::string& z_s, const std::string& psi_s, bool compare,
                const std::string& out) {
  const Vec zeta = parse_point(zeta_s, p, n), z = parse_point(z_s, p, n);
  json j{{"kind", kind}, {"p", p}, {"n", n}, {"zeta", flat(zeta)}, {"z", flat(z)}};
  if (kind == "theta" || kind == "theta_check") {
    j["form"] = form_to_json(build_theta(p, zeta, z, kind == "theta" ? Variant::Plain : Variant::Check));
  } else if (kind == "leray_phi") {
    LerayMap psi;
    if (psi_s == "difference") {
      psi = leray_difference();
    } else if (psi_s == "v_rho") {
      psi = leray_v_rho(ball_domain(p, n));
    } else {
      throw ParseError("unknown --psi '" + psi_s + "' (difference, v_rho)");
    }
    j["psi"] = psi_s;
    Form<double> phi = leray_phi(psi, zeta, z);
    j["form"] = form_to_json(phi);
    if (compare) {
      Form<double> th = build_theta(p, zeta, z);
      j["theta"] = form_to_json(th);
      j["max_abs_diff"] = (phi - th).max_abs_coeff();
    }
  } else {
    throw ParseError("unknown --kind '" + kind + "' (theta, theta_check, leray_phi)");
  }
  emit(j.dump(2) + "\n", out);
  return kOk;
}

int solve(int p, int n, const std::string& rhs, const std::vector<std::string>& points, int nodes, bool mc, std::uint64_t seed, double tol,
          const std::string& out) {
  if (n >= 3 || n < 1) throw Unsupported("dbar solve handles n = 1 (tensor grid) or n = 2 (--mc); got n = " + std::to_string(n));
  if (n == 2 && !mc) throw Unsupported("n = 2 needs the Monte Carlo probe (--mc)");
  if (p != 2) throw UnsupportedLevel("dbar solve is implemented for p = 2");
  ScalarField f;
  if (rhs == "bump") {
    f = radial_bump(p);
  } else if (rhs == "zero") {
    f = [p](const Vec&) { return Num(p); };
  } else {
    Expr e = parse_expr(rhs, p);
    if (e.arity() > n) throw DimensionMismatch("right-hand side uses more slots than n");
    f = scalar_field(e);
  }
  std::vector<Vec> zs;
  for (const auto& s : points) zs.push_back(parse_point(s, p, n));
  if (zs.empty()) {
    if (n == 1) {
      zs = dbar_probes(p);
    } else {
      zs.push_back(Vec{from_real(p, {0.05, 0, 0.1, 0})[0], from_real(p, {0.1, 0.05, 0, 0})[0]});
    }
  }
  const Domain U = ball_domain(p, n);
  json samples = json::array();
  double worst = 0;
  for (const Vec& z : zs) {
    json s{{"z", flat(z)}};
    if (n == 1) {
      DbarSample d = dbar_sample(f, U, z, nodes, nodes + 2);
      s["u"] = components(d.u);
      s["du_dzbar"] = components(d.du_dzbar);
      s["f"] = components(d.f);
      s["residual"] = d.residual;
      worst = std::max(worst, d.residual);
    } else {
      const std::size_t pts = 1 << 10;
      ScalarField u = [&](const Vec& y) { return solve_dbar_mc(f, U, y, pts, 8, seed).value; };
      McNum at = solve_dbar_mc(f, U, z, pts, 8, seed);
      Num du = dbar_residual_frame(u, z, 0, 2e-2);
      const double res = (du - f(z)).norm();
      s["u"] = components(at.value);
      s["u_std_error"] = components(at.std_error);
      s["du_dzbar"] = components(du);
      s["f"] = components(f(z));
      s["residual"] = res;
      s["points"] = at.points;
      worst = std::max(worst, res);
    }
    samples.push_back(s);
  }
  json j{{"p", p}, {"n", n}, {"rhs", rhs}, {"route", n == 1 ? "tensor" : "rqmc"}, {"nodes", nodes}, {"seed", seed}, {"samples", samples},
         {"max_residual", worst}, {"tol", tol}, {"pass", worst <= tol}};
  emit(j.dump(2) + "\n", out);
  return worst <= tol ? kOk : kFail;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cayley-Dickson hypercomplex kernels: verification and evaluation"};
  app.require_subcommand(1);

  auto* list = app.add_subcommand("list-suites", "list verification suites");

  Flags fl;
  std::string suite;
  auto* ver = app.add_subcommand("verify", "run a verification suite");
  ver->add_option("suite", suite, "suite name")->required();
  ver->add_option("--config", fl.config, "JSON config file");
  ver->add_option("--seed", fl.seed, "RNG seed");
  ver->add_option("--tol", fl.tol, "override every check tolerance");
  ver->add_option("--nodes", fl.nodes, "grid size override")->check(CLI::NonNegativeNumber);
  ver->add_option("--p", fl.p, "algebra level");
  ver->add_option("--n", fl.n, "number of variables");
  ver->add_option("--out", fl.out, "write the JSON report here (CSV alongside)");
  ver->add_option("--format", fl.format, "stdout format")->check(CLI::IsMember({"json", "csv"}));
  ver->add_flag("--mc", fl.mc, "include the Monte Carlo probes");

  std::string kind = "theta", zeta_s, z_s, psi_s = "difference", kout;
  int kp = 2, kn = 1;
  bool compare = false;
  auto* ek = app.add_subcommand("eval-kernel", "print a kernel form at (zeta, z)");
  ek->add_option("--kind", kind, "theta, theta_check or leray_phi");
  ek->add_option("--p", kp, "algebra level")->check(CLI::Range(2, 4));
  ek->add_option("--n", kn, "number of variables")->check(CLI::Range(1, 4));
  ek->add_option("--zeta", zeta_s, "comma separated coordinates; ';' between variables")->required();
  ek->add_option("--z", z_s, "comma separated coordinates; ';' between variables")->required();
  ek->add_option("--psi", psi_s, "Leray map: difference or v_rho (unit ball)");
  ek->add_flag("--compare", compare, "also print theta and the largest coefficient difference");
  ek->add_option("--out", kout, "output file");

  std::string rhs = "bump", sout;
  std::vector<std::string> points;
  int sp = 2, sn = 1, snodes = 6;
  bool smc = false;
  std::uint64_t sseed = 1;
  double stol = 1e-2;
  auto* sv = app.add_subcommand("solve", "solve du/dz~ = f on the unit ball and report residuals");
  sv->add_option("--rhs", rhs, "bump, zero, or an expression literal");
  sv->add_option("--p", sp, "algebra level");
  sv->add_option("--n", sn, "number of variables");
  sv->add_option("--point", points, "evaluation point (repeatable)");
  sv->add_option("--nodes", snodes, "radial nodes of the volume grid")->check(CLI::PositiveNumber);
  sv->add_option("--seed", sseed, "RNG seed for --mc");
  sv->add_option("--tol", stol, "residual tolerance")->check(CLI::PositiveNumber);
  sv->add_flag("--mc", smc, "Monte Carlo probe (n = 2)");
  sv->add_option("--out", sout, "output file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*list) {
      for (const auto& s : suite_registry()) std::cout << s.name << "\t" << s.description << "\n";
      return kOk;
    }
    if (*ver) return verify(suite, fl, *ver);
    if (*ek) return eval_kernel(kind, kp, kn, zeta_s, z_s, psi_s, compare, kout);
    if (*sv) return solve(sp, sn, rhs, points, snodes, smc, sseed, stol, sout);
  } catch (const SingularKernel& e) {
    std::cerr << "singular kernel: " << e.what() << "\n";
    return kUsage;
  } catch (const cdh::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
