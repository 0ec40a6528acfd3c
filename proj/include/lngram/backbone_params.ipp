#pragma once

// Parameter visitation for DecoderParams. Included from backbone.hpp.

namespace lngram {

namespace detail {

template <class P, class F>
void visit_decoder(P& p, F&& f) {
  f(std::string("embed"), ParamGroup::backbone, p.embed);
  for (std::size_t l = 0; l < p.blocks.size(); ++l) {
    auto& b = p.blocks[l];
    const std::string prefix = "layers." + std::to_string(l + 1) + ".";
    if (b.lngram) {
      auto& lg = *b.lngram;
      const std::string lp = prefix + "lngram.";
      for (std::size_t s = 0; s < lg.codec.projections.size(); ++s) {
        f(lp + "codec.s" + std::to_string(s), ParamGroup::codec, lg.codec.projections[s]);
      }
      for (std::size_t s = 0; s < lg.bank.groups.size(); ++s) {
        for (std::size_t k = 0; k < lg.bank.groups[s].size(); ++k) {
          f(lp + "table.s" + std::to_string(s) + ".n" + std::to_string(lg.bank.orders[k]), ParamGroup::table,
            lg.bank.groups[s][k].entries);
        }
      }
      for (std::size_t i = 0; i < lg.readout.key_proj.size(); ++i) {
        const std::string idx = std::to_string(i);
        f(lp + "key_proj." + idx, ParamGroup::readout, lg.readout.key_proj[i]);
        f(lp + "key_bias." + idx, ParamGroup::readout, lg.readout.key_bias[i]);
        f(lp + "value_proj." + idx, ParamGroup::readout, lg.readout.value_proj[i]);
        f(lp + "value_bias." + idx, ParamGroup::readout, lg.readout.value_bias[i]);
      }
      f(lp + "conv", ParamGroup::readout, lg.readout.conv_kernels);
    }
    f(prefix + "attn_gain", ParamGroup::backbone, b.attn_gain);
    f(prefix + "wq", ParamGroup::backbone, b.wq);
    f(prefix + "wk", ParamGroup::backbone, b.wk);
    f(prefix + "wv", ParamGroup::backbone, b.wv);
    f(prefix + "wo", ParamGroup::backbone, b.wo);
    f(prefix + "ffn_gain", ParamGroup::backbone, b.ffn_gain);
    f(prefix + "w_in", ParamGroup::backbone, b.w_in);
    f(prefix + "w_out", ParamGroup::backbone, b.w_out);
  }
  f(std::string("final_gain"), ParamGroup::backbone, p.final_gain);
  f(std::string("head"), ParamGroup::backbone, p.head);
}

}  // namespace detail

template <class T, class F>
void for_each_param(DecoderParams<T>& p, F&& f) {
  detail::visit_decoder(p, f);
}

template <class T, class F>
void for_each_param(const DecoderParams<T>& p, F&& f) {
  detail::visit_decoder(p, f);
}

template <class T>
DecoderParams<T> zeros_like(const DecoderParams<T>& params) {
  DecoderParams<T> z = params;
  for_each_param(z, [](const std::string&, ParamGroup, Matrix<T>& m) { m.setZero(); });
  return z;
}

}  // namespace lngram
