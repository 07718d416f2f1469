#pragma once

#include <chrono>
#include <cmath>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "xct/acquisition.hpp"
#include "xct/align.hpp"
#include "xct/config.hpp"
#include "xct/fdk.hpp"
#include "xct/stack_io.hpp"

namespace xct {

// --- simulate ---------------------------------------------------------------

struct SimulateSummary {
    int projections = 0;
    int frames = 0;
    bool controller_saturated = false;
};

inline SimulateSummary run_simulate(const PipelineConfig& cfg) {
    cfg.validate();
    const fs::path dir = cfg.io.run_dir;
    fs::create_directories(dir);

    const ConeBeamGeometry geom = cfg.geometry();
    const Phantom phantom = cfg.make_configured_phantom();
    const DegradationModel model = make_degradation_model(cfg.detector, cfg.degradation_params(), cfg.seed);

    AcquisitionOptions opt;
    opt.adaptive = cfg.acquisition.mode == "adaptive";
    if (!opt.adaptive)
        opt.schedule.assign(static_cast<std::size_t>(cfg.scan.num_projections()),
                            cfg.acquisition.frames_per_angle);
    opt.policy = cfg.qef;
    opt.k_mad = cfg.defect_k_mad;
    opt.n_ref = cfg.acquisition.n_ref;
    opt.edge_alpha_px2 = cfg.degradation.edge_alpha_px2;
    opt.projector_step_fraction = cfg.phantom.projector_step_fraction;
    opt.center_offset_px = cfg.acquisition.center_offset_px;
    opt.detector_tilt_deg = cfg.acquisition.detector_tilt_deg;
    opt.threads = cfg.threads;
    opt.keep_ideal = cfg.io.write_ideal;

    AcquisitionResult res =
        simulate_acquisition(phantom, geom, cfg.detector, cfg.scan, model, opt, cfg.seed);

    StoredStack raw;
    raw.kind = "raw";
    raw.dtype = cfg.io.dtype;
    raw.pixel_pitch_um = cfg.detector.pixel_pitch_um;
    raw.detector_max = cfg.detector.max_value;
    raw.frames = std::move(res.stack.frames);
    raw.timing.reserve(raw.frames.size());
    for (std::size_t i = 0; i < raw.frames.size(); ++i) {
        const int proj = res.stack.projection_index[i];
        SidecarRow row;
        row.index = proj;
        row.angle_deg = res.stack.angle_deg[i];
        row.cumulative_time_s = res.stack.cumulative_time_s[i];
        row.frames_averaged = res.records[static_cast<std::size_t>(proj)].n_frames;
        row.qef_measured = res.records[static_cast<std::size_t>(proj)].qef;
        raw.timing.push_back(row);
    }
    save_stack(dir, "raw", raw);
    save_references(dir, res.refs_start, res.refs_end, cfg.io.dtype);
    save_truth(dir, res.truth, cfg.io.dtype, cfg.io.write_ideal);

    std::ofstream cfg_out(dir / "config.json");
    cfg_out << serialize_config(cfg);

    SimulateSummary s;
    s.projections = static_cast<int>(res.records.size());
    s.frames = static_cast<int>(raw.frames.size());
    s.controller_saturated = res.controller_saturated;
    if (s.controller_saturated)
        std::cerr << "simulate: Q_ef controller saturated at n_max during the run\n";
    return s;
}

// --- preprocess -------------------------------------------------------------

struct PreprocessSummary {
    int projections = 0;
    int flatfield_fallbacks = 0;
    DefectMask mask;
};

// average -> defect repair -> Q_ef bookkeeping -> interpolated flat-field,
// per projection. static_flatfield forces t = 0, i.e. the ordinary
// correction with the start references only.
inline PreprocessSummary run_preprocess(const PipelineConfig& cfg, bool static_flatfield = false) {
    cfg.validate();
    const fs::path dir = cfg.io.run_dir;
    StoredStack raw = load_stack(dir, "raw");
    auto [ref_start, ref_end] = load_references(dir);

    const DefectMask mask = detect_defects(ref_start.dark, ref_start.flat, cfg.defect_k_mad);
    const ReferenceSet refs = build_reference_set(ref_start, ref_end, mask);
    const DriftSlopes slopes = estimate_drift_slopes(refs);

    StoredStack corrected;
    corrected.kind = "corrected";
    corrected.dtype = cfg.io.dtype;
    corrected.pixel_pitch_um = raw.pixel_pitch_um;
    corrected.detector_max = raw.detector_max;

    PreprocessSummary summary;
    summary.mask = mask;
    std::size_t i = 0;
    while (i < raw.frames.size()) {
        const int proj = raw.timing[i].index;
        std::vector<Image> group;
        double t_sum = 0.0;
        const double angle = raw.timing[i].angle_deg;
        while (i < raw.frames.size() && raw.timing[i].index == proj) {
            group.push_back(std::move(raw.frames[i]));
            t_sum += raw.timing[i].cumulative_time_s;
            ++i;
        }
        const AveragedFrames avg = average_frames(group);
        const Image repaired = repair_defects(avg.mean, mask);
        double qef;
        try {
            qef = compute_qef(repaired, cfg.qef);
        } catch (const degenerate_band_error&) {
            qef = std::numeric_limits<double>::quiet_NaN();
        }
        const double t_mid_abs = t_sum / static_cast<double>(group.size());
        const double t_rel = static_flatfield ? 0.0 : t_mid_abs - ref_start.t_mid_s;
        FlatFieldResult ff = flat_field_correct(repaired, t_rel, refs, slopes);
        summary.flatfield_fallbacks += ff.fallback_count;

        SidecarRow row;
        row.index = proj;
        row.angle_deg = angle;
        row.cumulative_time_s = t_mid_abs;
        row.frames_averaged = static_cast<int>(group.size());
        row.qef_measured = qef;
        corrected.timing.push_back(row);
        corrected.frames.push_back(std::move(ff.ic));
        ++summary.projections;
    }
    save_stack(dir, "corrected", corrected);
    if (summary.flatfield_fallbacks > 0)
        std::cerr << "preprocess: " << summary.flatfield_fallbacks
                  << " pixels fell back to neighbor repair (collapsed denominator)\n";
    return summary;
}

// --- reconstruct --------------------------------------------------------------

struct ReconstructSummary {
    AlignmentEstimate alignment;
    bool alignment_estimated = false;
    GridSpec grid;
};

inline GridSpec resolve_grid(const PipelineConfig& cfg) {
    GridSpec g = GridSpec::default_for(cfg.geometry(), cfg.detector);
    if (cfg.grid.nx > 0) g.nx = cfg.grid.nx;
    if (cfg.grid.ny > 0) g.ny = cfg.grid.ny;
    if (cfg.grid.nz > 0) g.nz = cfg.grid.nz;
    if (cfg.grid.voxel_mm > 0.0) g.voxel_mm = cfg.grid.voxel_mm;
    return g;
}

inline ReconstructSummary run_reconstruct(const PipelineConfig& cfg, bool skip_align = false) {
    cfg.validate();
    const auto t_begin = std::chrono::steady_clock::now();
    const fs::path dir = cfg.io.run_dir;
    StoredStack corrected = load_stack(dir, "corrected");
    if (corrected.frames.empty()) throw io_error("corrected stack is empty");
    if (std::abs(corrected.pixel_pitch_um - cfg.detector.pixel_pitch_um) > 1e-9 ||
        corrected.frames.front().rows != cfg.detector.rows ||
        corrected.frames.front().cols != cfg.detector.cols)
        throw config_error("geometry/stack mismatch: stack was acquired with a different detector "
                           "(pitch or dimensions differ from the config)");

    std::vector<double> angles(corrected.timing.size());
    for (std::size_t k = 0; k < angles.size(); ++k) angles[k] = corrected.timing[k].angle_deg;

    ReconstructSummary summary;
    if (skip_align || !cfg.align.enabled) {
        summary.alignment = AlignmentEstimate{};
    } else if (cfg.align.manual) {
        summary.alignment =
            AlignmentEstimate{cfg.align.tilt_deg, cfg.align.center_offset_px, 1.0};
        summary.alignment.validate();
    } else {
        AlignSearchParams par;
        par.tilt_range_deg = cfg.align.tilt_range_deg;
        par.tilt_step_deg = cfg.align.tilt_step_deg;
        par.offset_range_px = cfg.align.offset_range_px;
        par.offset_step_px = cfg.align.offset_step_px;
        par.max_pairs = cfg.align.max_pairs;
        par.threads = cfg.threads;
        summary.alignment = estimate_alignment(corrected.frames, angles, par);
        summary.alignment_estimated = true;
        if (summary.alignment.confidence < par.confidence_floor)
            std::cerr << "reconstruct: low alignment confidence ("
                      << summary.alignment.confidence << "); consider align.manual\n";
    }

    const ConeBeamGeometry geom = cfg.geometry();
    summary.grid = resolve_grid(cfg);
    FilterSpec filter;
    filter.kind = filter_kind_from_string(cfg.filter.kind);
    filter.padding = cfg.filter.padding;

    FdkOptions fopt;
    fopt.threads = cfg.threads;
    fopt.slabs = cfg.slabs;
    fopt.apply_tilt_correction = !skip_align && cfg.align.enabled;
    const Volume vol = fdk_reconstruct(corrected.frames, angles, geom, cfg.detector,
                                       summary.alignment, summary.grid, filter, fopt);
    save_volume(dir, vol);
    export_slices(dir, vol, cfg.io.slices_per_axis);

    const auto t_end = std::chrono::steady_clock::now();
    KeyValues manifest;
    manifest["config_hash"] = config_hash(cfg);
    manifest["alignment_tilt_deg"] = format_double(summary.alignment.tilt_deg);
    manifest["alignment_center_offset_px"] = format_double(summary.alignment.center_offset_px);
    manifest["alignment_confidence"] = format_double(summary.alignment.confidence);
    manifest["alignment_estimated"] = summary.alignment_estimated ? "1" : "0";
    manifest["grid_nx"] = std::to_string(summary.grid.nx);
    manifest["grid_ny"] = std::to_string(summary.grid.ny);
    manifest["grid_nz"] = std::to_string(summary.grid.nz);
    manifest["grid_voxel_mm"] = format_double(summary.grid.voxel_mm);
    manifest["views"] = std::to_string(angles.size());
    manifest["elapsed_s"] = format_double(
        std::chrono::duration<double>(t_end - t_begin).count());
    write_key_values(dir / "manifest.txt", manifest);

    if (summary.alignment_estimated) {
        // a ready-to-merge config block so later runs skip re-estimation
        json snippet;
        snippet["align"] = {{"enabled", true},
                            {"manual", true},
                            {"tilt_deg", summary.alignment.tilt_deg},
                            {"center_offset_px", summary.alignment.center_offset_px}};
        std::ofstream out(dir / "align_estimate.json");
        out << snippet.dump(2) << "\n";
    }
    return summary;
}

// --- plot ---------------------------------------------------------------------

namespace detail {

// Minimal polyline rasterizer; the text tables are the real output, the
// images are for eyeballing runs.
inline void render_series_pgm(const fs::path& path, std::vector<double> ys) {
    const int w = 480, h = 320, margin = 10;
    Image img(h, w, 255.0);
    for (double& y : ys)
        if (!std::isfinite(y)) y = 0.0; // degenerate-band measurements plot at the floor
    if (ys.size() >= 2) {
        double lo = ys[0], hi = ys[0];
        for (double y : ys) {
            lo = std::min(lo, y);
            hi = std::max(hi, y);
        }
        if (hi <= lo) hi = lo + 1.0;
        auto px = [&](std::size_t i) {
            return margin + static_cast<double>(i) * (w - 2 * margin) /
                                static_cast<double>(ys.size() - 1);
        };
        auto py = [&](double y) { return h - margin - (y - lo) / (hi - lo) * (h - 2 * margin); };
        for (std::size_t i = 0; i + 1 < ys.size(); ++i) {
            const double x0 = px(i), y0 = py(ys[i]), x1 = px(i + 1), y1 = py(ys[i + 1]);
            const int steps = static_cast<int>(std::max(std::abs(x1 - x0), std::abs(y1 - y0))) + 1;
            for (int s = 0; s <= steps; ++s) {
                const double t = static_cast<double>(s) / steps;
                const int xx = static_cast<int>(std::lround(x0 + t * (x1 - x0)));
                const int yy = static_cast<int>(std::lround(y0 + t * (y1 - y0)));
                if (img.in_bounds(yy, xx)) img.at(yy, xx) = 0.0;
            }
        }
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write " + path.string());
    out << "P5\n" << w << " " << h << "\n255\n";
    std::vector<unsigned char> buf(img.size());
    for (std::size_t i = 0; i < img.size(); ++i) buf[i] = static_cast<unsigned char>(img[i]);
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

} // namespace detail

struct PlotSummary {
    int qef_rows = 0;
    int std_rows = 0;
};

// Emits the Q_ef / frame-count history and the band-noise history as text
// tables plus rendered curves.
inline PlotSummary run_plot(const PipelineConfig& cfg) {
    const fs::path dir = cfg.io.run_dir;
    if (!fs::exists(dir / "corrected_stack.meta") && !fs::exists(dir / "raw_stack.meta"))
        throw io_error("plot: no logs found in " + dir.string() +
                       " (expected corrected_stack.meta or raw_stack.meta)");

    PlotSummary summary;
    std::vector<double> qef_series, n_series;
    if (fs::exists(dir / "corrected_stack.meta")) {
        const StoredStack corrected = load_stack(dir, "corrected");
        std::ofstream tsv(dir / "plot_qef_n.tsv");
        tsv << "# proj_index\tangle_deg\tt_mid_s\tframes_averaged\tqef_measured\n";
        for (const SidecarRow& r : corrected.timing) {
            tsv << r.index << "\t" << format_double(r.angle_deg) << "\t"
                << format_double(r.cumulative_time_s) << "\t" << r.frames_averaged << "\t"
                << format_double(r.qef_measured) << "\n";
            qef_series.push_back(r.qef_measured);
            n_series.push_back(r.frames_averaged);
            ++summary.qef_rows;
        }
        detail::render_series_pgm(dir / "plot_qef.pgm", qef_series);
        detail::render_series_pgm(dir / "plot_n.pgm", n_series);
    }

    if (fs::exists(dir / "raw_stack.meta")) {
        StoredStack raw = load_stack(dir, "raw");
        DefectMask mask;
        bool have_mask = false;
        if (fs::exists(dir / "refs.meta")) {
            auto [ref_start, ref_end] = load_references(dir);
            mask = detect_defects(ref_start.dark, ref_start.flat, cfg.defect_k_mad);
            have_mask = true;
        }
        std::ofstream tsv(dir / "plot_std_vs_time.tsv");
        tsv << "# proj_index\tt_mid_s\tframes_averaged\tband_std\n";
        std::vector<double> std_series;
        std::size_t i = 0;
        while (i < raw.frames.size()) {
            const int proj = raw.timing[i].index;
            std::vector<Image> group;
            double t_sum = 0.0;
            while (i < raw.frames.size() && raw.timing[i].index == proj) {
                group.push_back(std::move(raw.frames[i]));
                t_sum += raw.timing[i].cumulative_time_s;
                ++i;
            }
            Image avg = average_frames(group).mean;
            if (have_mask) avg = repair_defects(avg, mask);
            const int band_end = std::min(cfg.qef.band_row_end, avg.rows);
            double mean = 0.0, ss = 0.0;
            const std::size_t n = static_cast<std::size_t>(band_end - cfg.qef.band_row_begin) *
                                  avg.cols;
            for (int r = cfg.qef.band_row_begin; r < band_end; ++r)
                for (int c = 0; c < avg.cols; ++c) mean += avg.at(r, c);
            mean /= static_cast<double>(n);
            for (int r = cfg.qef.band_row_begin; r < band_end; ++r)
                for (int c = 0; c < avg.cols; ++c) {
                    const double d = avg.at(r, c) - mean;
                    ss += d * d;
                }
            const double band_std = std::sqrt(ss / static_cast<double>(n - 1));
            tsv << proj << "\t" << format_double(t_sum / group.size()) << "\t" << group.size()
                << "\t" << format_double(band_std) << "\n";
            std_series.push_back(band_std);
            ++summary.std_rows;
        }
        detail::render_series_pgm(dir / "plot_std_vs_time.pgm", std_series);
    }
    return summary;
}

// --- full ----------------------------------------------------------------------

inline void run_full(const PipelineConfig& cfg, bool skip_align, bool static_flatfield) {
    run_simulate(cfg);
    run_preprocess(cfg, static_flatfield);
    run_reconstruct(cfg, skip_align);
    run_plot(cfg);
}

} // namespace xct
