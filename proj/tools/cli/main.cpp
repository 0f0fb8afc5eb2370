// tracemerge: decode experiments, evaluate result files, run self-checks.

#include "selftest.hpp"

#include <tracemerge/logits.hpp>
#include <tracemerge/run.hpp>

#include <CLI11.hpp>

#include <iostream>

namespace {

using namespace tracemerge;

struct DecodeArgs {
    std::string config;
    std::optional<std::size_t> limit;
    bool resume = false;
};

struct EvalArgs {
    std::string results;
    std::string gold;
    std::string mode;
    std::uint64_t k = 1;
    std::string extract = "final-line";
    bool allow_mixed = false;
};

struct SelftestArgs {
    std::optional<std::string> suite;
    std::optional<std::string> fault;
    double scale = 1.0;
};

int cmd_eval(const EvalArgs &args) {
    EvalOptions options;
    try {
        options.mode = eval_mode_from_string(args.mode);
        options.rule = ExtractionRule::parse(args.extract);
    } catch (const ConfigError &e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    }
    options.k = args.k;
    options.allow_mixed = args.allow_mixed;
    return run_eval(args.results, args.gold, options, std::cout, std::cerr);
}

int cmd_selftest(const SelftestArgs &args) {
    if (args.fault) {
        if (*args.fault != "reduction-order") {
            std::cerr << "config error: --inject-fault: unknown fault '" << *args.fault << "' (reduction-order)\n";
            return kExitConfig;
        }
        debug::set_corrupt_reduction_order(true);
    }
    selftest::Options options;
    options.scale = args.scale;
    return selftest::run_all(std::cout, args.suite, options) ? kExitOk : kExitPartial;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Ensemble decoding over K reasoning traces with a shared merged answer"};
    app.require_subcommand(1);

    DecodeArgs decode;
    auto *dec = app.add_subcommand("decode", "Decode every prompt of a run config to JSONL records");
    dec->add_option("--config", decode.config, "Run config JSON")->required()->check(CLI::ExistingFile);
    dec->add_option("--limit", decode.limit, "Decode at most this many prompts");
    dec->add_flag("--resume", decode.resume, "Keep existing output and skip recorded ids");

    EvalArgs eval;
    auto *ev = app.add_subcommand("eval", "Score a results file against gold answers");
    ev->add_option("--results", eval.results, "Results JSONL")->required();
    ev->add_option("--gold", eval.gold, "Gold JSONL of {id, answer}")->required();
    ev->add_option("--mode", eval.mode, "mv | ensemble | pass_at_k")
        ->required()
        ->check(CLI::IsMember({"mv", "ensemble", "pass_at_k"}));
    ev->add_option("--k", eval.k, "k for pass_at_k");
    ev->add_option("--extract", eval.extract, "boxed | final-line | regex:<pattern>");
    ev->add_flag("--allow-mixed", eval.allow_mixed, "Accept records with different config hashes");

    SelftestArgs self;
    auto *st = app.add_subcommand("selftest", "Run the conformance suites");
    st->add_option("--suite", self.suite, "Run only this suite")->check(CLI::IsMember(tracemerge::selftest::suite_names()));
    st->add_option("--inject-fault", self.fault, "Deliberately break a component (reduction-order)");
    st->add_option("--scale", self.scale, "Multiply case counts")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? tracemerge::kExitOk : tracemerge::kExitConfig;
    }

    if (*dec) {
        tracemerge::DecodeOptions options;
        options.limit = decode.limit;
        options.resume = decode.resume;
        return tracemerge::run_decode(decode.config, options, std::cerr);
    }
    if (*ev) return cmd_eval(eval);
    return cmd_selftest(self);
}
