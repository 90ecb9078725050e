#include "omnicodec/losses.hpp"

#include "omnicodec/errors.hpp"
#include "omnicodec/kernels.hpp"
#include "omnicodec/rng.hpp"

#include <cmath>

namespace omnicodec {

namespace {

var align_1d(const var & x, int64_t len) {
    if (x->val.numel() == len) return x;
    return ad::slice_rows(x, 0, len);
}

tensor mel_matrix(int win, int bins, int n_mels, int sample_rate_hz) {
    const auto bank = kern::mel_filterbank(n_mels, win, double(sample_rate_hz));
    tensor t({int64_t(bins), int64_t(n_mels)}); // transposed for power . W
    for (int m = 0; m < n_mels; ++m)
        for (int b = 0; b < bins; ++b)
            t.v[size_t(b * n_mels + m)] = float(bank[size_t(m) * size_t(bins) + size_t(b)]);
    return t;
}

} // namespace

var multiscale_mel_loss(const var & x, const var & x_hat, int sample_rate_hz,
                        int64_t max_mismatch) {
    const int64_t lx = x->val.numel(), ly = x_hat->val.numel();
    if (std::llabs(lx - ly) > max_mismatch)
        fail(err::length_mismatch, "signals differ by " + std::to_string(std::llabs(lx - ly)) +
             " samples (allowed " + std::to_string(max_mismatch) + ")");
    const int64_t len = std::min(lx, ly);
    const var xa = align_1d(x, len);
    const var xb = align_1d(x_hat, len);

    std::vector<std::pair<var, double>> terms;
    int n_scales = 0;
    for (int p = 6; p <= 11; ++p) {
        const int win = 1 << p;
        const int hop = win / 4;
        const int bins = win / 2 + 1;
        ++n_scales;
        if (len < win) continue; // zero frames contribute zero loss
        var mw = ad::constant(mel_matrix(win, bins, 64, sample_rate_hz));
        var ma = ad::matmul(ad::stft_power(xa, win, hop), mw);
        var mb = ad::matmul(ad::stft_power(xb, win, hop), mw);
        var l1 = ad::l1_mean_all(ma, mb);
        var l2 = ad::mse_mean_all(ad::log_eps(ma, 1e-5f), ad::log_eps(mb, 1e-5f));
        terms.emplace_back(l1, 1.0);
        terms.emplace_back(l2, 1.0);
    }
    if (terms.empty()) {
        tensor zero({1});
        return ad::constant(std::move(zero));
    }
    var sum = ad::weighted_sum(terms);
    return ad::scale(sum, 1.0f / float(n_scales));
}

var self_guidance_loss(const var & h_e, const var & h_q) {
    if (h_e->val.shape != h_q->val.shape)
        fail(err::shape_mismatch, "self_guidance_loss: shapes differ");
    return ad::mse_sumdim_meanframes(ad::detach(h_e), h_q);
}

// ---- discriminator ----

discriminator_bank init_discriminator(uint64_t seed) {
    discriminator_bank bank;
    const int ch = bank.channels;
    for (int win : bank.windows) {
        const std::string pre = "w" + std::to_string(win) + ".";
        auto conv = [&](const std::string & name, int co, int ci, int kh, int kw, bool zero) {
            tensor w({co, ci, kh, kw});
            if (!zero) {
                rng r = rng::from_seed_and_tag(seed, "disc." + pre + name);
                const double a = 1.0 / std::sqrt(double(ci) * kh * kw);
                for (auto & v : w.v) v = float(r.next_uniform(-a, a));
            }
            bank.params.add(pre + name + ".w", std::move(w));
            bank.params.add(pre + name + ".b", tensor({co}));
        };
        conv("c0", ch, 1, 3, 3, false);
        conv("c1", ch, ch, 3, 3, false);
        conv("c2", ch, ch, 3, 3, false);
        conv("c3", 1, ch, 3, 3, true); // zero final layer: untrained bank scores 0
    }
    return bank;
}

disc_out discriminator_forward(const discriminator_bank & bank, int window, const var & audio,
                               bool detach_params) {
    const std::string pre = "w" + std::to_string(window) + ".";
    auto getp = [&](const std::string & name) {
        const var & p = bank.params.get(pre + name);
        return detach_params ? ad::detach(p) : p;
    };
    var spec = ad::sqrt_eps(ad::stft_power(audio, window, window / 4), 1e-9f);
    const int64_t f = spec->val.dim(0), b = spec->val.dim(1);
    var x = ad::reshape(spec, {1, f, b});
    disc_out out;
    x = ad::leaky_relu(ad::conv2d(x, getp("c0.w"), getp("c0.b"), 1, 1), 0.2f);
    out.feats.push_back(x);
    x = ad::leaky_relu(ad::conv2d(x, getp("c1.w"), getp("c1.b"), 2, 2), 0.2f);
    out.feats.push_back(x);
    x = ad::leaky_relu(ad::conv2d(x, getp("c2.w"), getp("c2.b"), 2, 2), 0.2f);
    out.feats.push_back(x);
    out.logits = ad::conv2d(x, getp("c3.w"), getp("c3.b"), 1, 1);
    return out;
}

namespace {

var hinge_real(const var & logits) { // mean relu(1 - D)
    var ones = ad::constant([&] {
        tensor t(logits->val.shape);
        t.fill(1.0f);
        return t;
    }());
    return ad::mean_all(ad::relu(ad::sub(ones, logits)));
}

var hinge_fake(const var & logits) { // mean relu(1 + D)
    var ones = ad::constant([&] {
        tensor t(logits->val.shape);
        t.fill(1.0f);
        return t;
    }());
    return ad::mean_all(ad::relu(ad::add(ones, logits)));
}

} // namespace

adv_losses adversarial_losses(const discriminator_bank & bank, const var & x, const var & x_hat) {
    if (x->val.numel() != x_hat->val.numel())
        fail(err::length_mismatch, "adversarial_losses: lengths differ");
    std::vector<std::pair<var, double>> dis_terms, gen_terms, fm_terms;
    int64_t n_fm = 0;
    int64_t n_active = 0;
    for (int win : bank.windows) {
        if (x->val.numel() < win) continue; // scale has no frames on this signal
        ++n_active;
        // generator-side passes: bank weights frozen inside the pass
        disc_out fake_g = discriminator_forward(bank, win, x_hat, true);
        disc_out real_g = [&] {
            // reference features carry no gradient at all
            ad::no_grad_guard ng;
            return discriminator_forward(bank, win, ad::constant(x->val), true);
        }();
        gen_terms.emplace_back(ad::mean_all(fake_g.logits), -1.0);
        for (size_t l = 0; l < fake_g.feats.size(); ++l) {
            var ref = ad::constant(real_g.feats[l]->val);
            double norm = 0.0;
            for (float v : ref->val.v) norm += std::abs(double(v));
            norm = norm / std::max<double>(double(ref->val.numel()), 1.0) + 1e-8;
            fm_terms.emplace_back(ad::l1_mean_all(fake_g.feats[l], ref), 1.0 / norm);
            ++n_fm;
        }
        // discriminator-side passes: x_hat detached, bank weights live
        disc_out real_d = discriminator_forward(bank, win, x, false);
        disc_out fake_d = discriminator_forward(bank, win, ad::detach(x_hat), false);
        dis_terms.emplace_back(hinge_real(real_d.logits), 1.0);
        dis_terms.emplace_back(hinge_fake(fake_d.logits), 1.0);
    }
    adv_losses out;
    if (n_active == 0) {
        out.dis = ad::constant(tensor({1}));
        out.gen = ad::constant(tensor({1}));
        out.fm = ad::constant(tensor({1}));
        return out;
    }
    out.dis = ad::scale(ad::weighted_sum(dis_terms), 1.0f / float(n_active));
    out.gen = ad::scale(ad::weighted_sum(gen_terms), 1.0f / float(n_active));
    out.fm = ad::scale(ad::weighted_sum(fm_terms), 1.0f / float(std::max<int64_t>(n_fm, 1)));
    return out;
}

loss_totals total_loss(const loss_parts & parts, const loss_weights & w) {
    auto check = [](const var & v, const char * name) {
        if (v && !std::isfinite(v->scalar()))
            fail(err::non_finite_loss, std::string("loss term ") + name + " is not finite");
    };
    check(parts.ac_recon, "ac_recon");
    check(parts.se_recon, "se_recon");
    check(parts.commit, "commit");
    check(parts.self_guidance, "self_guidance");
    check(parts.gen, "gen");
    check(parts.fm, "fm");
    check(parts.dis, "dis");

    std::vector<std::pair<var, double>> gen_terms;
    if (parts.ac_recon) gen_terms.emplace_back(parts.ac_recon, double(w.ac_recon));
    if (parts.se_recon) gen_terms.emplace_back(parts.se_recon, double(w.se_recon));
    if (parts.commit) gen_terms.emplace_back(parts.commit, double(w.commit));
    if (parts.self_guidance) gen_terms.emplace_back(parts.self_guidance, double(w.self_guidance));
    if (parts.gen) gen_terms.emplace_back(parts.gen, double(w.gen));
    if (parts.fm) gen_terms.emplace_back(parts.fm, double(w.fm));

    loss_totals out;
    if (gen_terms.empty()) {
        out.generator_total = ad::constant(tensor({1}));
    } else {
        out.generator_total = ad::weighted_sum(gen_terms);
    }
    if (parts.dis) {
        out.discriminator_total = ad::weighted_sum({{parts.dis, double(w.dis)}});
    } else {
        out.discriminator_total = ad::constant(tensor({1}));
    }
    if (!std::isfinite(out.generator_total->scalar()) || !std::isfinite(out.discriminator_total->scalar()))
        fail(err::non_finite_loss, "combined loss is not finite");
    return out;
}

} // namespace omnicodec
