#include <CLI11.hpp>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "punit/bspline.hpp"
#include "punit/dtm.hpp"
#include "punit/errors.hpp"
#include "punit/fit.hpp"
#include "punit/io_util.hpp"
#include "punit/lattice.hpp"
#include "punit/mech.hpp"
#include "punit/parallel.hpp"
#include "punit/persistence.hpp"
#include "punit/scalar_grid.hpp"
#include "punit/voxel_grid.hpp"

namespace {

using punit::Error;
using punit::validation_error;

std::array<std::int64_t, 3> parse_dims(const std::string& text) {
    long long a = 0, b = 0, c = 0;
    if (std::sscanf(text.c_str(), "%lld,%lld,%lld", &a, &b, &c) != 3)
        throw validation_error("expected three comma-separated integers, got \"" + text + "\"");
    return {a, b, c};
}

std::array<int, 3> parse_int3(const std::string& text) {
    const auto d = parse_dims(text);
    return {int(d[0]), int(d[1]), int(d[2])};
}

std::array<double, 3> parse_double3(const std::string& text) {
    std::array<double, 3> out;
    if (std::sscanf(text.c_str(), "%lf,%lf,%lf", &out[0], &out[1], &out[2]) != 3)
        throw validation_error("expected three comma-separated reals, got \"" + text + "\"");
    return out;
}

// ladder syntax: "first:last:count"
std::vector<double> parse_ladder(const std::string& text) {
    double lo = 0.0, hi = 0.0;
    int count = 0;
    if (std::sscanf(text.c_str(), "%lf:%lf:%d", &lo, &hi, &count) != 3 || count < 1)
        throw validation_error("expected a density ladder first:last:count, got \"" + text + "\"");
    std::vector<double> ladder(count);
    for (int i = 0; i < count; ++i)
        ladder[i] = count == 1 ? lo : lo + (hi - lo) * double(i) / double(count - 1);
    return ladder;
}

punit::BaseMaterial parse_material(const std::string& text) {
    punit::BaseMaterial mat;
    if (std::sscanf(text.c_str(), "E=%lf,nu=%lf", &mat.youngs, &mat.poisson) != 2)
        throw validation_error("expected material as E=<youngs>,nu=<poisson>, got \"" + text + "\"");
    mat.validate();
    return mat;
}

std::string format_csv(const std::vector<std::array<double, 3>>& rows, const char* header) {
    std::string text = header;
    text += '\n';
    char line[128];
    for (const auto& r : rows) {
        std::snprintf(line, sizeof line, "%d,%.17g,%.17g\n", int(r[0]), r[1], r[2]);
        text += line;
    }
    return text;
}

// ---- stages, shared by the subcommands and the pipeline runner ----

void stage_voxel(const std::string& script_text, std::array<std::int64_t, 3> dims,
                 const std::string& out) {
    const auto steps = punit::parse_csg_script(script_text);
    const auto grid = punit::run_csg(steps, dims);
    std::int64_t solid = 0;
    for (std::int64_t t = 0; t < grid.size(); ++t) solid += grid.data()[t] != 0;
    punit::save_voxel_file(grid, out);
    std::printf("voxel: %lld x %lld x %lld, %lld solid voxels -> %s\n", (long long)dims[0],
                (long long)dims[1], (long long)dims[2], (long long)solid, out.c_str());
}

void stage_dtm(const std::string& in, double m, const std::string& out) {
    const auto grid = punit::load_voxel_file(in);
    const auto field = punit::dtm_field(grid, m);
    punit::save_scalar_file(field, out);
    std::printf("dtm: m=%g over %lld voxels -> %s\n", m, (long long)grid.size(), out.c_str());
}

void stage_fit(const std::string& in, const punit::FitConfig& cfg, const std::string& out,
               const std::string& report_path) {
    const auto field = punit::load_scalar_file(in);
    const auto result = punit::con_lspia(field, cfg);
    punit::save_spline_file(result.spline, out);
    if (!report_path.empty()) {
        nlohmann::json doc;
        doc["iterations"] = result.report.iterations;
        doc["converged"] = result.report.converged;
        doc["final_mse"] = result.report.final_mse;
        doc["frozen_updates"] = result.report.frozen_updates;
        doc["mse_trace"] = result.report.mse_trace;
        punit::write_file_atomic(report_path, doc.dump());
    }
    std::printf("fit: %d iterations, mse %.6g, %s -> %s\n", result.report.iterations,
                result.report.final_mse, result.report.converged ? "converged" : "iteration cap",
                out.c_str());
}

void stage_spline_check(const std::string& in) {
    const auto s = punit::load_spline_file(in);
    const auto n = s.basis_counts();
    const auto asym = punit::check_symmetry(s, 64);
    std::printf("spline: degrees %d,%d,%d control %d x %d x %d sym_degree %d,%d,%d\n",
                s.kv[0].degree, s.kv[1].degree, s.kv[2].degree, n[0], n[1], n[2], s.sym_degree[0],
                s.sym_degree[1], s.sym_degree[2]);
    std::printf("spline: max mirror asymmetry %.3g, %.3g, %.3g\n", asym[0], asym[1], asym[2]);
}

void stage_connect(const std::string& in, const punit::ConnectivityConfig& cfg,
                   std::optional<double> density, const std::string& out,
                   const std::string& trace_path) {
    auto unit = punit::load_spline_file(in);
    if (density) {
        // recenter so the target-volume sublevel set sits at zero; a constant
        // shift keeps every mirror pair equal bit for bit
        const double c =
            punit::threshold_for_density(unit, *density, std::max(cfg.grid, 32));
        for (double& v : unit.coeffs) v -= c;
        std::printf("connect: threshold %.6g subtracted for density %.3g\n", c, *density);
    }
    const auto result = punit::optimize_connectivity(unit, cfg);
    punit::save_spline_file(result.spline, out);
    if (!trace_path.empty()) {
        std::vector<std::array<double, 3>> rows;
        for (const auto& r : result.trace)
            rows.push_back({double(r.iter), r.loss, r.density});
        punit::write_file_atomic(trace_path, format_csv(rows, "iter,L,density"));
    }
    if (result.converged)
        std::printf("connect: connected after %d iterations -> %s\n", result.iterations,
                    out.c_str());
    else
        std::fprintf(stderr, "connect: warning: still disconnected after %d iterations\n",
                     result.iterations);
}

struct SpliceThreshold {
    std::optional<double> constant;      // --threshold
    std::optional<double> density;       // --density
    std::string density_field;           // --density-field path
    std::array<int, 3> field_n = {0, 0, 0}; // 0 = derive from cells
    std::array<int, 3> field_p = {2, 2, 2};
};

void stage_splice(const std::string& in, std::array<int, 3> cells, const SpliceThreshold& how,
                  int res, std::array<double, 3> size, const std::string& out,
                  const char* label = "splice") {
    const int specified = int(how.constant.has_value()) + int(how.density.has_value()) +
                          int(!how.density_field.empty());
    if (specified > 1)
        throw validation_error(std::string(label) + ": give at most one of threshold, density, density-field");

    punit::LatticeSpec spec;
    spec.unit = punit::load_spline_file(in);
    spec.cells = cells;
    if (how.constant) {
        spec.threshold = *how.constant;
    } else if (how.density) {
        spec.threshold =
            punit::threshold_for_density(spec.unit, *how.density, std::max(res, 32));
        std::printf("%s: threshold %.6g for density %.3g\n", label, spec.threshold,
                    *how.density);
    } else if (!how.density_field.empty()) {
        const auto rho_field = punit::load_spline_file(how.density_field);
        punit::FitConfig cfg;
        for (int a = 0; a < 3; ++a) {
            cfg.n[a] = how.field_n[a] > 0 ? how.field_n[a] : std::clamp(cells[a], 2, 6);
            cfg.p[a] = std::min(how.field_p[a], cfg.n[a] - 1);
        }
        cfg.max_iters = 4000;
        cfg.tol = 1e-12;
        const auto fitted = punit::threshold_field_from_density(spec.unit, rho_field, cells, cfg,
                                                                std::max(res, 32));
        if (fitted.clamped_cells > 0)
            std::fprintf(stderr, "%s: warning: %d cells clamped to the achievable range\n",
                         label, fitted.clamped_cells);
        spec.threshold_field = fitted.field;
    }

    auto mesh = punit::mesh_structure(spec, res);
    if (mesh.triangles.empty()) {
        std::fprintf(stderr, "%s: warning: empty mesh (no surface crossings); %s not written\n",
                     label, out.c_str());
        return;
    }
    punit::scale_mesh(mesh, size);
    punit::save_mesh_file(mesh, out);
    std::printf("%s: %zu triangles, %zu vertices -> %s\n", label, mesh.triangles.size(),
                mesh.vertices.size(), out.c_str());
}

void stage_homogenize(const std::string& in, const std::vector<double>& ladder, int res,
                      const punit::BaseMaterial& mat, double void_scale, const std::string& out) {
    const auto unit = punit::load_spline_file(in);
    const auto curves = punit::build_density_curves(unit, mat, ladder, res, void_scale);
    punit::save_curves_file(curves, out);
    std::printf("homogenize: %zu ladder points at %d^3, %d responsive entries -> %s\n",
                ladder.size(), res, curves.nonzero_entries, out.c_str());
}

void stage_topopt(const std::string& curves_path, const punit::TopOptConfig& cfg,
                  const std::string& out, const std::string& trace_path) {
    const auto curves = punit::load_curves_file(curves_path);
    const auto result = punit::topopt(cfg, curves);
    punit::save_spline_file(result.density, out);
    if (!trace_path.empty()) {
        std::vector<std::array<double, 3>> rows;
        for (std::size_t t = 0; t < result.compliance_trace.size(); ++t)
            rows.push_back({double(t), result.compliance_trace[t], result.volume_trace[t]});
        punit::write_file_atomic(trace_path, format_csv(rows, "iter,compliance,volume"));
    }
    std::printf("topopt: compliance %.8g -> %.8g in %d iterations (%s) -> %s\n",
                result.compliance_trace.front(), result.compliance_trace.back(),
                result.iterations, result.converged ? "converged" : "iteration cap", out.c_str());
}

// ---- pipeline runner ----

std::string join_path(const std::string& dir, const std::string& path) {
    if (dir.empty() || path.empty()) return path;
    if (std::filesystem::path(path).is_absolute()) return path;
    return (std::filesystem::path(dir) / path).string();
}

template <typename T>
T field_or(const nlohmann::json& obj, const char* key, T fallback) {
    if (!obj.contains(key)) return fallback;
    return obj.at(key).get<T>();
}

void run_pipeline_stage(const nlohmann::json& obj, const std::string& workdir) {
    const auto stage = obj.at("stage").get<std::string>();
    auto path = [&](const char* key) { return join_path(workdir, obj.at(key).get<std::string>()); };
    auto opt_path = [&](const char* key) {
        return obj.contains(key) ? join_path(workdir, obj.at(key).get<std::string>()) : std::string();
    };

    if (stage == "voxel") {
        std::string script;
        if (obj.contains("csg"))
            script = obj.at("csg").dump();
        else
            script = punit::read_file_text(path("csg_file"));
        const auto dims = obj.at("dims").get<std::array<std::int64_t, 3>>();
        stage_voxel(script, dims, path("out"));
    } else if (stage == "dtm") {
        stage_dtm(path("in"), field_or(obj, "m", 5.0), path("out"));
    } else if (stage == "fit") {
        punit::FitConfig cfg;
        cfg.n = field_or(obj, "n", std::array<int, 3>{11, 11, 11});
        cfg.p = field_or(obj, "p", std::array<int, 3>{3, 3, 3});
        cfg.r = field_or(obj, "r", std::array<int, 3>{5, 5, 5});
        cfg.tol = field_or(obj, "tol", 1e-8);
        cfg.max_iters = field_or(obj, "max_iters", 2000);
        cfg.accelerate = field_or(obj, "accelerate", false);
        stage_fit(path("in"), cfg, path("out"), opt_path("report"));
    } else if (stage == "connect") {
        punit::ConnectivityConfig cfg;
        cfg.grid = field_or(obj, "grid", 64);
        cfg.step = field_or(obj, "step", 0.05);
        cfg.max_iters = field_or(obj, "max_iters", 500);
        std::optional<double> density;
        if (obj.contains("density")) density = obj.at("density").get<double>();
        stage_connect(path("in"), cfg, density, path("out"), opt_path("trace"));
    } else if (stage == "splice" || stage == "mesh") {
        SpliceThreshold how;
        if (obj.contains("threshold")) how.constant = obj.at("threshold").get<double>();
        if (obj.contains("density")) how.density = obj.at("density").get<double>();
        if (obj.contains("density_field")) how.density_field = path("density_field");
        how.field_n = field_or(obj, "field_n", std::array<int, 3>{0, 0, 0});
        how.field_p = field_or(obj, "field_p", std::array<int, 3>{2, 2, 2});
        const auto cells = stage == "mesh" ? std::array<int, 3>{1, 1, 1}
                                           : field_or(obj, "cells", std::array<int, 3>{1, 1, 1});
        stage_splice(path("in"), cells, how, field_or(obj, "res", 64),
                     field_or(obj, "size", std::array<double, 3>{1.0, 1.0, 1.0}), path("out"),
                     stage.c_str());
    } else if (stage == "homogenize") {
        std::vector<double> ladder;
        if (obj.contains("rho") && obj.at("rho").is_array())
            ladder = obj.at("rho").get<std::vector<double>>();
        else
            ladder = parse_ladder(field_or(obj, "rho", std::string("0.1:0.9:9")));
        punit::BaseMaterial mat;
        if (obj.contains("material")) {
            mat.youngs = obj.at("material").at("youngs").get<double>();
            mat.poisson = obj.at("material").at("poisson").get<double>();
        }
        stage_homogenize(path("in"), ladder, field_or(obj, "res", 16), mat,
                         field_or(obj, "void_scale", 0.05), path("out"));
    } else if (stage == "topopt") {
        punit::TopOptConfig cfg;
        cfg.elems = field_or(obj, "elements", cfg.elems);
        cfg.n = field_or(obj, "n", cfg.n);
        cfg.p = field_or(obj, "p", cfg.p);
        cfg.volfrac = field_or(obj, "volfrac", cfg.volfrac);
        cfg.rho_min = field_or(obj, "rho_min", cfg.rho_min);
        cfg.rho_max = field_or(obj, "rho_max", cfg.rho_max);
        cfg.move = field_or(obj, "move", cfg.move);
        cfg.damping = field_or(obj, "damping", cfg.damping);
        cfg.max_iters = field_or(obj, "max_iters", cfg.max_iters);
        cfg.tol = field_or(obj, "tol", cfg.tol);
        cfg.cg_tol = field_or(obj, "cg_tol", cfg.cg_tol);
        cfg.bc = field_or(obj, "case", cfg.bc);
        stage_topopt(path("curves"), cfg, path("out"), opt_path("trace"));
    } else {
        throw validation_error("pipeline: unknown stage \"" + stage + "\"");
    }
}

void run_pipeline(const std::string& config_path) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(punit::read_file_text(config_path));
    } catch (const nlohmann::json::exception& e) {
        throw validation_error(std::string("pipeline config is not valid JSON: ") + e.what());
    }
    const std::string workdir = field_or(doc, "workdir", std::string());
    if (!workdir.empty()) std::filesystem::create_directories(workdir);
    if (doc.contains("seed"))
        std::printf("pipeline: seed %lld\n", doc.at("seed").get<long long>());
    if (!doc.contains("stages") || !doc.at("stages").is_array())
        throw validation_error("pipeline config needs a \"stages\" array");

    const auto& stages = doc.at("stages");
    for (std::size_t i = 0; i < stages.size(); ++i) {
        std::string name = "?";
        try {
            name = field_or(stages.at(i), "stage", std::string("?"));
            run_pipeline_stage(stages.at(i), workdir);
        } catch (const Error& e) {
            throw Error(e.kind(),
                        "stage " + std::to_string(i + 1) + " (" + name + "): " + e.what());
        } catch (const nlohmann::json::exception& e) {
            throw validation_error("stage " + std::to_string(i + 1) + " (" + name +
                                   "): bad config field: " + e.what());
        }
    }
    std::printf("pipeline: %zu stages complete\n", stages.size());
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"periodic porous unit toolkit"};
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("-t,--threads", threads, "worker thread cap (default: PUNIT_THREADS or all)");

    // voxel
    auto* voxel = app.add_subcommand("voxel", "rasterize a CSG script to a voxel grid");
    std::string voxel_csg, voxel_dims = "32,32,32", voxel_out;
    voxel->add_option("--csg", voxel_csg, "CSG script (JSON)")->required();
    voxel->add_option("--dims", voxel_dims, "grid size nx,ny,nz");
    voxel->add_option("-o,--out", voxel_out, "output .vgrid/.txt")->required();

    // dtm
    auto* dtm = app.add_subcommand("dtm", "distance-to-measure field of a voxel grid");
    std::string dtm_in, dtm_out;
    double dtm_m = 5.0;
    dtm->add_option("-i,--in", dtm_in, "input .vgrid")->required();
    dtm->add_option("-m", dtm_m, "number of nearest solids averaged")->check(CLI::PositiveNumber);
    dtm->add_option("-o,--out", dtm_out, "output .sgrid")->required();

    // fit
    auto* fit = app.add_subcommand("fit", "fit a symmetric periodic B-spline to a field");
    std::string fit_in, fit_out, fit_report, fit_n = "11,11,11", fit_p = "3,3,3", fit_r = "5,5,5";
    double fit_tol = 1e-8;
    int fit_iters = 2000;
    bool fit_accel = false;
    fit->add_option("-i,--in", fit_in, "input .sgrid")->required();
    fit->add_option("--n", fit_n, "control counts per axis");
    fit->add_option("--p", fit_p, "degrees per axis");
    fit->add_option("--r", fit_r, "symmetry degrees per axis");
    fit->add_option("--tol", fit_tol, "coefficient update tolerance");
    fit->add_option("--max-iters", fit_iters, "iteration cap")->check(CLI::PositiveNumber);
    fit->add_flag("--accelerate", fit_accel, "conjugate search, same fixed point in fewer rounds");
    fit->add_option("-o,--out", fit_out, "output unit.json")->required();
    fit->add_option("--report", fit_report, "fit report JSON");

    // spline check
    auto* spline = app.add_subcommand("spline", "spline utilities");
    spline->require_subcommand(1);
    auto* spline_check = spline->add_subcommand("check", "validate and describe a spline file");
    std::string spline_in;
    spline_check->add_option("-i,--in", spline_in, "spline JSON")->required();

    // connect
    auto* connect = app.add_subcommand("connect", "enforce one connected solid component");
    std::string connect_in, connect_out, connect_trace;
    punit::ConnectivityConfig connect_cfg;
    double connect_density = -1.0;
    connect->add_option("-i,--in", connect_in, "input unit.json")->required();
    connect->add_option("--grid", connect_cfg.grid, "filtration resolution");
    connect->add_option("--step", connect_cfg.step, "descent step");
    connect->add_option("--max-iters", connect_cfg.max_iters, "iteration cap");
    connect->add_option("--density", connect_density,
                        "recenter the threshold for this solid fraction first");
    connect->add_option("-o,--out", connect_out, "output unit.json")->required();
    connect->add_option("--trace", connect_trace, "loss trace CSV");

    // splice and mesh
    auto add_mesh_flags = [](CLI::App* cmd, std::string& in, std::string& out, int& res,
                             std::string& size, double& threshold, double& density,
                             std::string& field, bool* has_threshold) {
        cmd->add_option("-i,--in", in, "input unit.json")->required();
        cmd->add_option("--threshold", threshold, "constant solid threshold")
            ->each([has_threshold](const std::string&) { *has_threshold = true; });
        cmd->add_option("--density", density, "solid fraction, threshold derived");
        cmd->add_option("--density-field", field, "density field spline JSON");
        cmd->add_option("--res", res, "marching cubes resolution");
        cmd->add_option("--size", size, "physical box in mm, x,y,z");
        cmd->add_option("-o,--out", out, "output .stl/.obj")->required();
    };
    auto* splice = app.add_subcommand("splice", "tile a unit and export the surface mesh");
    std::string splice_in, splice_out, splice_field, splice_size = "1,1,1";
    std::string splice_cells = "4,4,4", splice_field_n = "0,0,0", splice_field_p = "2,2,2";
    int splice_res = 128;
    double splice_threshold = 0.0, splice_density = -1.0;
    bool splice_has_threshold = false;
    splice->add_option("--cells", splice_cells, "unit counts per axis");
    add_mesh_flags(splice, splice_in, splice_out, splice_res, splice_size, splice_threshold,
                   splice_density, splice_field, &splice_has_threshold);
    splice->add_option("--field-n", splice_field_n, "threshold field control counts");
    splice->add_option("--field-p", splice_field_p, "threshold field degrees");

    auto* mesh = app.add_subcommand("mesh", "export the surface mesh of one unit");
    std::string mesh_in, mesh_out, mesh_field, mesh_size = "1,1,1";
    int mesh_res = 64;
    double mesh_threshold = 0.0, mesh_density = -1.0;
    bool mesh_has_threshold = false;
    add_mesh_flags(mesh, mesh_in, mesh_out, mesh_res, mesh_size, mesh_threshold, mesh_density,
                   mesh_field, &mesh_has_threshold);

    // homogenize
    auto* homog = app.add_subcommand("homogenize", "stiffness-vs-density curves of a unit");
    std::string homog_in, homog_out, homog_rho = "0.1:0.9:9", homog_mat = "E=1,nu=0.3";
    int homog_res = 16;
    double homog_void = 0.05;
    homog->add_option("-i,--in", homog_in, "input unit.json")->required();
    homog->add_option("--rho", homog_rho, "density ladder first:last:count");
    homog->add_option("--res", homog_res, "voxelization resolution");
    homog->add_option("--material", homog_mat, "base material E=<val>,nu=<val>");
    homog->add_option("--void-scale", homog_void, "void stiffness fraction");
    homog->add_option("-o,--out", homog_out, "output curves.json")->required();

    // topopt
    auto* topopt_cmd = app.add_subcommand("topopt", "minimum-compliance density optimization");
    punit::TopOptConfig top_cfg;
    std::string top_curves, top_out, top_trace;
    std::string top_elems = "24,8,8", top_n = "12,4,4", top_p = "2,2,2";
    topopt_cmd->add_option("--curves", top_curves, "curves.json from homogenize")->required();
    topopt_cmd->add_option("--case", top_cfg.bc, "three-point-bending or compression");
    topopt_cmd->add_option("--elements", top_elems, "element grid ex,ey,ez");
    topopt_cmd->add_option("--n", top_n, "density control counts");
    topopt_cmd->add_option("--p", top_p, "density degrees");
    topopt_cmd->add_option("--volfrac", top_cfg.volfrac, "volume fraction");
    topopt_cmd->add_option("--rho-min", top_cfg.rho_min, "lower density bound");
    topopt_cmd->add_option("--rho-max", top_cfg.rho_max, "upper density bound");
    topopt_cmd->add_option("--move", top_cfg.move, "move limit");
    topopt_cmd->add_option("--damping", top_cfg.damping, "update damping");
    topopt_cmd->add_option("--max-iters", top_cfg.max_iters, "iteration cap");
    topopt_cmd->add_option("--tol", top_cfg.tol, "density change tolerance");
    topopt_cmd->add_option("--cg-tol", top_cfg.cg_tol, "solver relative residual");
    topopt_cmd->add_option("-o,--out", top_out, "output density spline JSON")->required();
    topopt_cmd->add_option("--trace", top_trace, "compliance trace CSV");

    // pipeline
    auto* pipeline = app.add_subcommand("pipeline", "run a staged JSON pipeline");
    std::string pipeline_config;
    pipeline->add_option("-c,--config", pipeline_config, "pipeline config JSON")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (threads == 0) {
            if (const char* env = std::getenv("PUNIT_THREADS")) threads = std::atoi(env);
        }
        if (threads < 0) throw validation_error("thread cap must be positive");
        if (threads > 0) punit::par::set_thread_cap(threads);

        if (voxel->parsed()) {
            stage_voxel(punit::read_file_text(voxel_csg), parse_dims(voxel_dims), voxel_out);
        } else if (dtm->parsed()) {
            stage_dtm(dtm_in, dtm_m, dtm_out);
        } else if (fit->parsed()) {
            punit::FitConfig cfg;
            cfg.n = parse_int3(fit_n);
            cfg.p = parse_int3(fit_p);
            cfg.r = parse_int3(fit_r);
            cfg.tol = fit_tol;
            cfg.max_iters = fit_iters;
            cfg.accelerate = fit_accel;
            stage_fit(fit_in, cfg, fit_out, fit_report);
        } else if (spline->parsed()) {
            stage_spline_check(spline_in);
        } else if (connect->parsed()) {
            std::optional<double> density;
            if (connect->count("--density") > 0) density = connect_density;
            stage_connect(connect_in, connect_cfg, density, connect_out, connect_trace);
        } else if (splice->parsed() || mesh->parsed()) {
            const bool is_splice = splice->parsed();
            SpliceThreshold how;
            if (is_splice ? splice_has_threshold : mesh_has_threshold)
                how.constant = is_splice ? splice_threshold : mesh_threshold;
            const double density = is_splice ? splice_density : mesh_density;
            if ((is_splice ? splice->count("--density") : mesh->count("--density")) > 0)
                how.density = density;
            how.density_field = is_splice ? splice_field : mesh_field;
            if (is_splice) {
                how.field_n = parse_int3(splice_field_n);
                how.field_p = parse_int3(splice_field_p);
            }
            stage_splice(is_splice ? splice_in : mesh_in,
                         is_splice ? parse_int3(splice_cells) : std::array<int, 3>{1, 1, 1}, how,
                         is_splice ? splice_res : mesh_res,
                         parse_double3(is_splice ? splice_size : mesh_size),
                         is_splice ? splice_out : mesh_out, is_splice ? "splice" : "mesh");
        } else if (homog->parsed()) {
            stage_homogenize(homog_in, parse_ladder(homog_rho), homog_res,
                             parse_material(homog_mat), homog_void, homog_out);
        } else if (topopt_cmd->parsed()) {
            top_cfg.elems = parse_int3(top_elems);
            top_cfg.n = parse_int3(top_n);
            top_cfg.p = parse_int3(top_p);
            stage_topopt(top_curves, top_cfg, top_out, top_trace);
        } else if (pipeline->parsed()) {
            run_pipeline(pipeline_config);
        }
    } catch (const Error& e) {
        std::fprintf(stderr, "punit: %s\n", e.what());
        return e.exit_code();
    } catch (const std::exception& e) {
        std::fprintf(stderr, "punit: unexpected error: %s\n", e.what());
        return 3;
    }
    return 0;
}
