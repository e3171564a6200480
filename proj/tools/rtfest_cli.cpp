#include <functional>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "rtfest/harness.hpp"

namespace {

// 0 success, 1 validation failure, 2 I/O failure
int run(const std::function<void()>& body) {
    try {
        body();
        return 0;
    } catch (const rtfest::IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Wideband RTF estimation experiments"};
    app.require_subcommand(1);

    std::string config, out, target, noise, target_rir, noise_rir;

    auto* synthetic = app.add_subcommand("synthetic", "Monte-Carlo sweep over a synthetic scenario");
    synthetic->add_option("--config", config, "INI config file")->required();
    synthetic->add_option("--out", out, "output CSV")->required();

    auto* speech = app.add_subcommand("speech", "Speech experiment on WAV inputs");
    speech->add_option("--config", config, "INI config file")->required();
    speech->add_option("--target", target, "mono target source WAV")->required();
    speech->add_option("--noise", noise, "mono interferer WAV")->required();
    speech->add_option("--target-rir", target_rir, "multichannel target RIR WAV")->required();
    speech->add_option("--noise-rir", noise_rir, "multichannel interferer RIR WAV")->required();
    speech->add_option("--out", out, "output CSV")->required();

    auto* crb = app.add_subcommand("crb", "Cramer-Rao bound curves only");
    crb->add_option("--config", config, "INI config file")->required();
    crb->add_option("--out", out, "output CSV")->required();

    auto* selftest = app.add_subcommand("selftest", "Run quick invariant checks");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help();
        return 1;
    }

    if (*synthetic) return run([&] { rtfest::write_csv(out, rtfest::run_sweep(rtfest::load_sweep_spec(config))); });
    if (*crb) return run([&] { rtfest::write_csv(out, rtfest::run_crb_sweep(rtfest::load_sweep_spec(config))); });
    if (*speech) {
        return run([&] {
            const rtfest::SweepSpec spec = rtfest::load_sweep_spec(config);
            const rtfest::SpeechInputs in{rtfest::read_wav(target), rtfest::read_wav(noise), rtfest::read_wav(target_rir),
                                          rtfest::read_wav(noise_rir)};
            rtfest::write_csv(out, rtfest::run_speech_sweep(spec, in));
        });
    }
    if (*selftest) {
        int code = 1;
        const int status = run([&] { code = rtfest::selftest(std::cout) ? 0 : 1; });
        return status ? status : code;
    }
    return 1;
}
