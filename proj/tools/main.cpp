#include "omnicodec/config.hpp"
#include "omnicodec/errors.hpp"
#include "omnicodec/eval.hpp"
#include "omnicodec/session.hpp"
#include "omnicodec/token_io.hpp"
#include "omnicodec/train.hpp"
#include "omnicodec/wav.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace omnicodec;

namespace {

config_file load_config_with_overrides(const std::string & path,
                                       const std::vector<std::string> & sets) {
    std::string text;
    if (!path.empty()) {
        std::ifstream f(path, std::ios::binary);
        if (!f) fail(err::io_error, "cannot open config file " + path);
        text.assign((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
        text.push_back('\n');
    }
    for (const auto & s : sets) text += s + "\n"; // flags win over the file
    return parse_config(text, path.empty() ? "<cli>" : path);
}

int cmd_train(const std::string & config_path, const std::vector<std::string> & sets,
              const std::string & data, int64_t steps, const std::string & out_dir) {
    config_file cf = load_config_with_overrides(config_path, sets);
    if (steps > 0) cf.train.steps = steps;
    if (data == "synthetic") {
        cf.train.data_source = "synthetic";
    } else if (fs::is_directory(data)) {
        cf.train.data_source = "wav_dir";
    } else {
        cf.train.data_source = "single_clip";
    }
    validated_config cfg = validate(cf.codec);
    train_state st = train_state::init(cfg, cf.train);
    if (cf.train.data_source == "wav_dir") {
        for (const auto & e : fs::directory_iterator(data))
            if (e.is_regular_file() && e.path().extension() == ".wav")
                st.wav_files.push_back(e.path().string());
        std::sort(st.wav_files.begin(), st.wav_files.end());
        if (st.wav_files.empty()) fail(err::empty_corpus, "no .wav files under " + data);
    } else if (cf.train.data_source == "single_clip") {
        st.clip = wav_read(data);
        if (st.clip.sample_rate_hz != cfg.sample_rate_hz) {
            polyphase_resampler rs(st.clip.sample_rate_hz, cfg.sample_rate_hz);
            st.clip.samples = rs.process(st.clip.samples.data(), st.clip.size());
            st.clip.sample_rate_hz = cfg.sample_rate_hz;
        }
        const int64_t seg = int64_t(cf.train.segment_seconds * cfg.sample_rate_hz);
        if (st.clip.size() > seg) st.clip.samples.resize(size_t(seg));
    }
    fs::create_directories(out_dir);
    std::ofstream log(out_dir + "/train.log", std::ios::trunc);
    train_run(st, out_dir, [&](const std::string & line) {
        log << line << "\n";
        std::cerr << line << "\n";
    });
    std::cerr << "training done; checkpoints under " << out_dir << "\n";
    return 0;
}

int cmd_encode(const std::string & ckpt, const std::string & in, const std::string & out,
               double chunk_ms, const std::string & teacher_feats) {
    codec_model model = model_load(ckpt);
    pcm_buffer pcm = wav_read(in);
    if (pcm.sample_rate_hz != model.cfg.sample_rate_hz)
        fail(err::sample_rate_mismatch, in + " is " + std::to_string(pcm.sample_rate_hz) +
             " Hz, model expects " + std::to_string(model.cfg.sample_rate_hz));
    std::shared_ptr<semantic_teacher> teacher;
    if (!teacher_feats.empty())
        teacher = std::make_shared<file_teacher>(teacher_feats,
                                                 int64_t(model.cfg.teacher_sample_rate_hz * 2 / 25));
    codec_session session(model, teacher);
    int64_t chunk = 0;
    if (chunk_ms > 0) chunk = std::max<int64_t>(1, int64_t(chunk_ms * model.cfg.sample_rate_hz / 1000.0));
    token_matrix tokens = session.encode_all(pcm, chunk);
    write_tokens_file(out, tokens, make_token_header(model.cfg, tokens.frames));
    std::cerr << "encoded " << tokens.frames << " frames x " << tokens.streams << " streams to "
              << out << "\n";
    return 0;
}

int cmd_decode(const std::string & ckpt, const std::string & in, const std::string & out) {
    codec_model model = model_load(ckpt);
    token_file_header h;
    token_matrix tokens = read_tokens_file(in, h);
    check_token_header(h, model.cfg);
    codec_session session(model);
    pcm_buffer pcm = session.decode_all(tokens);
    wav_write(out, pcm);
    std::cerr << "decoded " << tokens.frames << " frames to " << pcm.size() << " samples in "
              << out << "\n";
    return 0;
}

int cmd_info(const std::string & in) {
    if (is_checkpoint_file(in)) {
        checkpoint ck = checkpoint_load(in);
        config_file cf = parse_config(ck.config_text, "<checkpoint>", false);
        validated_config cfg = validate(cf.codec);
        codec_model model = model_from_checkpoint(ck);
        std::cout << "kind=checkpoint\n";
        std::cout << "config_hash=" << ck.config_hash << "\n";
        std::cout << "sample_rate_hz=" << cfg.sample_rate_hz << "\n";
        std::cout << "hop=" << cfg.hop << "\n";
        std::cout << "frame_rate_hz=" << cfg.frame_rate_hz << "\n";
        std::cout << "streams=" << cfg.total_streams() << "\n";
        std::cout << "semantic_branch=" << (cfg.semantic_branch ? 1 : 0) << "\n";
        std::cout << "acoustic_stages=" << cfg.acoustic_stages << "\n";
        std::cout << "hidden_dim=" << cfg.hidden_dim << "\n";
        int64_t params = model.gen.param_count();
        int64_t cb = 0;
        if (cfg.semantic_branch) cb += model.semantic_cb.k * model.semantic_cb.d;
        for (const auto & s : model.acoustic.stages) cb += s.k * s.d;
        std::cout << "graph_parameters=" << params << "\n";
        std::cout << "codebook_vectors=" << cb << "\n";
        return 0;
    }
    token_file_header h;
    token_matrix tokens = read_tokens_file(in, h);
    const double frame_rate = h.frame_rate_hz();
    std::cout << "kind=tokens\n";
    std::cout << "frames=" << tokens.frames << "\n";
    std::cout << "streams=" << h.streams << "\n";
    std::cout << "has_semantic=" << ((h.flags & 1) != 0 ? 1 : 0) << "\n";
    std::cout << "sample_rate_hz=" << h.sample_rate << "\n";
    std::cout << "hop=" << h.hop << "\n";
    std::cout << "frame_rate_hz=" << frame_rate << "\n";
    std::cout << "tps=" << frame_rate << "x" << h.streams << "\n";
    std::cout << "bits_per_code=" << int(h.bits_per_code) << "\n";
    std::cout << "nominal_bitrate_bps=" << bitrate_bps(frame_rate, h.streams, h.bits_per_code) << "\n";
    std::cout << "on_disk_bitrate_bps=" << frame_rate * double(h.streams) * 16.0 << "\n";
    std::cout << "duration_s=" << (frame_rate > 0 ? double(tokens.frames) / frame_rate : 0.0) << "\n";
    return 0;
}

int cmd_eval_recon(const std::string & ckpt, const std::string & wavs, const std::string & out) {
    codec_model model = model_load(ckpt);
    eval_recon_report rep = eval_recon(model, wavs);
    std::cout << rep.text();
    if (!out.empty()) {
        std::ofstream f(out, std::ios::trunc);
        if (!f) fail(err::io_error, "cannot write summary " + out);
        f << rep.summary();
    }
    return 0;
}

std::vector<token_matrix> read_token_dir(const std::string & dir) {
    std::vector<std::string> paths;
    if (fs::exists(dir))
        for (const auto & e : fs::directory_iterator(dir))
            if (e.is_regular_file() && e.path().extension() == ".tok")
                paths.push_back(e.path().string());
    std::sort(paths.begin(), paths.end());
    std::vector<token_matrix> out;
    for (const auto & p : paths) {
        token_file_header h;
        out.push_back(read_tokens_file(p, h));
    }
    return out;
}

int cmd_eval_ppl(const std::string & train_dir, const std::string & eval_dir,
                 const std::string & mode, int64_t vocab) {
    std::vector<token_matrix> train_corpus = read_token_dir(train_dir);
    std::vector<token_matrix> eval_corpus = read_token_dir(eval_dir);
    if (train_corpus.empty() || eval_corpus.empty())
        fail(err::empty_corpus, "token directories must contain .tok files");
    if (vocab <= 0) {
        token_file_header h;
        std::vector<std::string> paths;
        for (const auto & e : fs::directory_iterator(train_dir))
            if (e.is_regular_file() && e.path().extension() == ".tok")
                paths.push_back(e.path().string());
        std::sort(paths.begin(), paths.end());
        read_tokens_file(paths.front(), h);
        vocab = int64_t(1) << h.bits_per_code;
    }
    token_lm_config lmc;
    const double ppl = token_ppl(train_corpus, eval_corpus, vocab,
                                 mode == "ppl0" ? ppl_mode::ppl0 : ppl_mode::ppl_mean_8, lmc);
    std::cout << "mode=" << mode << " vocab=" << vocab << " ppl=" << ppl << "\n";
    return 0;
}

} // namespace

int main(int argc, char ** argv) {
    CLI::App app{"omnicodec: streaming neural audio codec with split semantic/acoustic quantizers"};
    app.require_subcommand(1);

    std::string config_path, data = "synthetic", out_dir = "ckpt";
    std::vector<std::string> sets;
    int64_t steps = 0;
    auto * sc_train = app.add_subcommand("train", "train a codec");
    sc_train->add_option("--config", config_path, "key=value config file");
    sc_train->add_option("--set", sets, "override config keys (key=value, repeatable)");
    sc_train->add_option("--data", data, "synthetic | wav dir | single clip.wav");
    sc_train->add_option("--steps", steps, "override train_steps");
    sc_train->add_option("--out", out_dir, "checkpoint directory")->required();

    std::string ckpt, in_path, out_path, teacher_feats;
    double chunk_ms = 0.0;
    auto * sc_enc = app.add_subcommand("encode", "wav -> token file");
    sc_enc->add_option("--ckpt", ckpt, "model checkpoint")->required();
    sc_enc->add_option("--in", in_path, "input wav")->required();
    sc_enc->add_option("--out", out_path, "output token file")->required();
    sc_enc->add_option("--chunk-ms", chunk_ms, "stream in fixed chunks (bit-identical to batch)");
    sc_enc->add_option("--teacher-feats", teacher_feats, "external teacher feature file");

    std::string d_ckpt, d_in, d_out;
    auto * sc_dec = app.add_subcommand("decode", "token file -> wav");
    sc_dec->add_option("--ckpt", d_ckpt, "model checkpoint")->required();
    sc_dec->add_option("--in", d_in, "input token file")->required();
    sc_dec->add_option("--out", d_out, "output wav")->required();

    std::string info_in;
    auto * sc_info = app.add_subcommand("info", "describe a token file or checkpoint");
    sc_info->add_option("--in", info_in, "token file or checkpoint")->required();

    std::string er_ckpt, er_wavs, er_out;
    auto * sc_er = app.add_subcommand("eval-recon", "objective reconstruction metrics over a wav dir");
    sc_er->add_option("--ckpt", er_ckpt)->required();
    sc_er->add_option("--wavs", er_wavs)->required();
    sc_er->add_option("--out", er_out, "machine-readable summary file");

    std::string pp_train, pp_eval, pp_mode = "ppl0";
    int64_t pp_vocab = 0;
    auto * sc_pp = app.add_subcommand("eval-ppl", "token LM perplexity (ppl0 / ppl8)");
    sc_pp->add_option("--tokens-train", pp_train)->required();
    sc_pp->add_option("--tokens-eval", pp_eval)->required();
    sc_pp->add_option("--mode", pp_mode)->check(CLI::IsMember({"ppl0", "ppl8"}));
    sc_pp->add_option("--vocab", pp_vocab, "override vocabulary size");

    try {
        app.parse(argc, argv);
        if (sc_train->parsed()) return cmd_train(config_path, sets, data, steps, out_dir);
        if (sc_enc->parsed()) return cmd_encode(ckpt, in_path, out_path, chunk_ms, teacher_feats);
        if (sc_dec->parsed()) return cmd_decode(d_ckpt, d_in, d_out);
        if (sc_info->parsed()) return cmd_info(info_in);
        if (sc_er->parsed()) return cmd_eval_recon(er_ckpt, er_wavs, er_out);
        if (sc_pp->parsed()) return cmd_eval_ppl(pp_train, pp_eval, pp_mode, pp_vocab);
        return 1;
    } catch (const CLI::ParseError & e) {
        if (e.get_exit_code() == 0) return app.exit(e); // --help
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const error & e) {
        std::cerr << "error: " << e.what() << "\n";
        return err_exit_code(e.code());
    } catch (const std::exception & e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
