// Copyright Contributors to the weathersplat project
// SPDX-License-Identifier: Apache-2.0

// weathersplat: render weather-stylized frame sequences from a job config.
//
//   weathersplat render job.yaml [--frames N] [--output DIR] [--seed S] [--threads T]
//   weathersplat demo-scene scene.ply

#include "weathersplat/weathersplat.hpp"

#include "CLI11.hpp"

#include <iostream>

using namespace weathersplat;

namespace {

int exit_code(const Error &e) {
    const std::string c = e.category();
    if (c == "config") return 2;
    if (c == "io") return 3;
    if (c == "format" || c == "data") return 4;
    if (c == "argument") return 5;
    return 1;
}

Gaussian splat(const Vec3 &mean, const Vec3 &scale, const Quat &rotation, const Rgb &color, double opacity = 0.95) {
    Gaussian g;
    g.mean = mean;
    g.scale = scale;
    g.rotation = rotation;
    g.opacity = opacity;
    g.sh = sh::from_color(color);
    return g;
}

/// A small synthetic yard: ground, a house with a pitched roof, a low wall,
/// and two conifers.
GaussianScene demo_scene() {
    Rng rng(11);
    std::vector<Gaussian> gs;
    const Quat flat = Quat::Identity();
    for (int i = -16; i <= 16; ++i) {
        for (int j = -16; j <= 16; ++j) {
            const double shade = 0.05 * rng.uniform();
            gs.push_back(splat(Vec3(0.5 * i, 0.5 * j, 0.0), Vec3(0.3, 0.3, 0.02), flat,
                               Rgb(0.30 + shade, 0.36 + shade, 0.24)));
        }
    }
    const Quat wall_x(Eigen::AngleAxisd(kPi / 2.0, Vec3::UnitX()));
    const Quat wall_y(Eigen::AngleAxisd(kPi / 2.0, Vec3::UnitY()));
    const Rgb plaster(0.78, 0.72, 0.62);
    for (int i = -4; i <= 4; ++i) {
        for (int k = 0; k <= 5; ++k) {
            const double x = 0.4 * i, z = 0.3 + 0.4 * k;
            gs.push_back(splat(Vec3(x, -1.6, z), Vec3(0.25, 0.25, 0.02), wall_x, plaster));
            gs.push_back(splat(Vec3(x, 1.6, z), Vec3(0.25, 0.25, 0.02), wall_x, plaster));
            if (std::abs(i) <= 4 && i % 2 == 0) {
                const double y = 0.4 * i;
                gs.push_back(splat(Vec3(-1.6, y, z), Vec3(0.25, 0.25, 0.02), wall_y, plaster));
                gs.push_back(splat(Vec3(1.6, y, z), Vec3(0.25, 0.25, 0.02), wall_y, plaster));
            }
        }
    }
    // Roof planes pitched at 25 degrees, ridge along x.
    const double pitch = 25.0 * kPi / 180.0;
    for (int side : {-1, 1}) {
        const Quat q(Eigen::AngleAxisd(side * pitch, Vec3::UnitX()));
        for (int i = -5; i <= 5; ++i) {
            for (int k = 0; k < 5; ++k) {
                const double run = 0.38 * k + 0.2;
                const Vec3 p(0.38 * i, -side * (1.8 - run * std::cos(pitch)), 2.5 + run * std::sin(pitch));
                gs.push_back(splat(p, Vec3(0.24, 0.24, 0.03), q, Rgb(0.45, 0.20, 0.16)));
            }
        }
    }
    for (int i = 0; i < 14; ++i) {
        gs.push_back(splat(Vec3(-3.5 + 0.5 * i, -4.5, 0.35), Vec3(0.3, 0.12, 0.3), flat, Rgb(0.52, 0.50, 0.48)));
    }
    for (const Vec3 &base : {Vec3(4.0, 2.5, 0.0), Vec3(-4.5, 3.0, 0.0)}) {
        gs.push_back(splat(base + Vec3(0, 0, 0.5), Vec3(0.12, 0.12, 0.5), flat, Rgb(0.35, 0.24, 0.15)));
        for (int layer = 0; layer < 4; ++layer) {
            const double r = 1.1 - 0.25 * layer;
            for (int a = 0; a < 8; ++a) {
                const double t = 2.0 * kPi * (a + 0.5 * layer) / 8.0;
                gs.push_back(splat(base + Vec3(r * std::cos(t), r * std::sin(t), 1.0 + 0.55 * layer),
                                   Vec3(0.35, 0.35, 0.12), flat, Rgb(0.12, 0.30 + 0.03 * layer, 0.15)));
            }
        }
    }
    return GaussianScene(std::move(gs), 0);
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Weather stylization for 3D Gaussian splatting scenes"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);

    auto *render = app.add_subcommand("render", "Render a job config into a frame sequence");
    std::string config_path;
    std::optional<int> frames;
    std::optional<std::string> output;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    render->add_option("config", config_path, "Job config (YAML)")->required();
    render->add_option("--frames", frames, "Override the frame count");
    render->add_option("--output", output, "Override the output directory");
    render->add_option("--seed", seed, "Override the job seed");
    render->add_option("--threads", threads, "Worker threads (0 = all cores)");

    auto *demo = app.add_subcommand("demo-scene", "Write a small synthetic scene as a PLY file");
    std::string demo_path;
    demo->add_option("output", demo_path, "Output .ply path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp &e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        std::cerr << "error[argument]: " << e.what() << "\n";
        return 5;
    }

    try {
        if (*demo) {
            const GaussianScene scene = demo_scene();
            save_scene(scene, demo_path);
            std::cout << "wrote " << scene.size() << " Gaussians to " << demo_path << "\n";
            return 0;
        }
        JobConfig cfg = parse_config(config_path);
        if (frames) {
            if (*frames < 1) throw ArgumentError("--frames must be >= 1");
            cfg.camera_path.frames = *frames;
            try {
                cfg.camera_path.validate();
            } catch (const ArgumentError &e) {
                throw ArgumentError(std::string("--frames ") + std::to_string(*frames) + ": " + e.what());
            }
        }
        if (output) cfg.output.dir = *output;
        if (seed) cfg.seed = *seed;
        if (threads) {
            if (*threads < 0) throw ArgumentError("--threads must be >= 0");
            cfg.threads = *threads;
        }
        const RunManifest m = run_job(cfg);
        double total = 0.0;
        for (const auto &f : m.frames) total += f.ms;
        std::cout << "rendered " << m.frames.size() << " frame(s) to " << cfg.output.dir.string() << " ("
                  << m.scene_gaussians << " scene Gaussians, " << m.particle_gaussians << " particle Gaussians, "
                  << total / static_cast<double>(m.frames.size()) << " ms/frame)\n";
        return 0;
    } catch (const Error &e) {
        std::cerr << "error[" << e.category() << "]: " << e.what() << "\n";
        return exit_code(e);
    } catch (const std::exception &e) {
        std::cerr << "error[internal]: " << e.what() << "\n";
        return 1;
    }
}
