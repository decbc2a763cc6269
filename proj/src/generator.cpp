#include "dumn/generator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>

#include "dumn/rng.hpp"
#include "json.hpp"

namespace dumn {

void GenConfig::validate() const {
  auto positive = [](int v, const char* name) {
    if (v < 1) throw std::invalid_argument(std::string("GenConfig: ") + name + " must be >= 1");
  };
  auto rate = [](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument(std::string("GenConfig: ") + name + " must be in [0,1]");
  };
  positive(n_users, "n_users");
  positive(n_items, "n_items");
  positive(n_attributes, "n_attributes");
  positive(n_brands, "n_brands");
  positive(interactions_per_user, "interactions_per_user");
  positive(session_length, "session_length");
  positive(n_genders, "n_genders");
  positive(n_age_buckets, "n_age_buckets");
  rate(click_noise_rate, "click_noise_rate");
  rate(unclick_miss_rate, "unclick_miss_rate");
  rate(explicit_quantile, "explicit_quantile");
  for (double p : {p_click, p_unclick, p_like, p_dislike})
    if (!(p >= 0.0)) throw std::invalid_argument("GenConfig: event probabilities must be >= 0");
  if (p_click + p_unclick + p_like + p_dislike <= 0.0)
    throw std::invalid_argument("GenConfig: event probabilities sum to zero");
}

double GroundTruth::affinity(std::size_t user, std::size_t session, std::size_t item) const {
  const auto& a = items[item].attributes;
  const auto& p = users[user].preference;
  const auto& s = users[user].sessions[session];
  double v = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) v += (p[k] + s[k]) * a[k];
  return v;
}

namespace {

constexpr std::uint64_t kCatalogStream = 0xC47A10;
constexpr std::uint64_t kUserStream = 0x05E4;

std::vector<double> gaussian(Rng& rng, int dim, double scale = 1.0) {
  std::vector<double> v(static_cast<std::size_t>(dim));
  for (double& x : v) x = scale * rng.normal();
  return v;
}

void normalize(std::vector<double>& v) {
  double n = 0.0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  if (n > 0.0)
    for (double& x : v) x /= n;
}

struct Catalog {
  std::vector<ItemTruth> items;
  std::vector<std::vector<double>> group_centroids;
};

Catalog make_catalog(const GenConfig& c) {
  Rng rng(derive_seed(c.seed, kCatalogStream));
  Catalog cat;
  std::vector<std::vector<double>> brands;
  for (int b = 0; b < c.n_brands; ++b) {
    auto v = gaussian(rng, c.n_attributes);
    normalize(v);
    brands.push_back(std::move(v));
  }
  for (int i = 0; i < c.n_items; ++i) {
    ItemTruth it;
    it.item_id = i;
    it.brand_id = 1 + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(c.n_brands)));
    it.attributes = gaussian(rng, c.n_attributes, c.brand_spread);
    const auto& centre = brands[static_cast<std::size_t>(it.brand_id - 1)];
    for (std::size_t k = 0; k < centre.size(); ++k) it.attributes[k] += centre[k];
    normalize(it.attributes);
    cat.items.push_back(std::move(it));
  }
  for (int g = 0; g < c.n_genders * c.n_age_buckets; ++g) {
    auto v = gaussian(rng, c.n_attributes);
    normalize(v);
    cat.group_centroids.push_back(std::move(v));
  }
  return cat;
}

struct UserStream {
  std::vector<Interaction> events;
  UserTruth truth;
};

UserStream generate_user(const GenConfig& c, const Catalog& cat, int user) {
  Rng rng(derive_seed(c.seed, kUserStream, static_cast<std::uint64_t>(user)));
  UserStream out;
  UserTruth& ut = out.truth;
  ut.user_id = user;
  const int gender = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(c.n_genders)));
  const int age = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(c.n_age_buckets)));
  ut.fields = {gender, age};
  const auto& centre = cat.group_centroids[static_cast<std::size_t>((gender - 1) * c.n_age_buckets + (age - 1))];
  ut.preference = gaussian(rng, c.n_attributes, c.user_spread);
  for (std::size_t k = 0; k < centre.size(); ++k) ut.preference[k] += centre[k];
  normalize(ut.preference);

  const double total = c.p_click + c.p_unclick + c.p_like + c.p_dislike;
  const std::array<double, 4> cumulative{c.p_click / total, (c.p_click + c.p_unclick) / total,
                                         (c.p_click + c.p_unclick + c.p_like) / total, 1.0};
  const std::size_t n = cat.items.size();
  const std::size_t n_high = n / 2;               // strictly above the median
  const std::size_t n_low = n - n_high;
  const std::size_t n_explicit = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(c.explicit_quantile * static_cast<double>(n))));

  std::vector<std::size_t> ranked(n);
  std::vector<double> aff(n);
  for (int e = 0; e < c.interactions_per_user; ++e) {
    if (e % c.session_length == 0) {
      auto s = gaussian(rng, c.n_attributes);
      normalize(s);
      for (double& x : s) x *= c.session_drift;
      ut.sessions.push_back(std::move(s));
      const auto& sv = ut.sessions.back();
      for (std::size_t i = 0; i < n; ++i) {
        double v = 0.0;
        for (std::size_t k = 0; k < sv.size(); ++k) v += (ut.preference[k] + sv[k]) * cat.items[i].attributes[k];
        aff[i] = v;
      }
      std::iota(ranked.begin(), ranked.end(), std::size_t{0});
      std::stable_sort(ranked.begin(), ranked.end(), [&](std::size_t a, std::size_t b) { return aff[a] < aff[b]; });
    }
    // ranked[0] is the lowest affinity item.
    auto from_low = [&](std::size_t count) { return ranked[rng.below(count)]; };
    auto from_high = [&](std::size_t count) { return ranked[n - 1 - rng.below(count)]; };

    const double u = rng.uniform();
    Feedback type = Feedback::dislike;
    for (std::size_t k = 0; k < 4; ++k) {
      if (u < cumulative[k]) {
        type = kAllFeedback[k];
        break;
      }
    }
    std::size_t item = 0;
    switch (type) {
      case Feedback::click:
        item = (n_high > 0 && !rng.bernoulli(c.click_noise_rate)) ? from_high(n_high) : from_low(n_low);
        break;
      case Feedback::unclick:
        item = (n_high > 0 && rng.bernoulli(c.unclick_miss_rate)) ? from_high(n_high) : from_low(n_low);
        break;
      case Feedback::like: item = from_high(n_explicit); break;
      case Feedback::dislike: item = from_low(n_explicit); break;
    }
    Interaction r;
    r.user_id = user;
    r.item_id = static_cast<std::int64_t>(item);
    r.timestamp = e;
    r.feedback = type;
    r.brand_id = cat.items[item].brand_id;
    r.user_fields = ut.fields;
    out.events.push_back(std::move(r));
  }
  return out;
}

GeneratedData assemble(Catalog cat, std::vector<UserStream> users) {
  GeneratedData data;
  data.truth.items = std::move(cat.items);
  for (auto& u : users) {
    data.log.insert(data.log.end(), std::make_move_iterator(u.events.begin()),
                    std::make_move_iterator(u.events.end()));
    data.truth.users.push_back(std::move(u.truth));
  }
  return data;
}

}  // namespace

GeneratedData generate_serial(const GenConfig& config) {
  config.validate();
  Catalog cat = make_catalog(config);
  std::vector<UserStream> users(static_cast<std::size_t>(config.n_users));
  for (int u = 0; u < config.n_users; ++u) users[static_cast<std::size_t>(u)] = generate_user(config, cat, u);
  return assemble(std::move(cat), std::move(users));
}

GeneratedData generate(const GenConfig& config) {
  config.validate();
  Catalog cat = make_catalog(config);
  std::vector<UserStream> users(static_cast<std::size_t>(config.n_users));
#pragma omp parallel for schedule(dynamic, 8)
  for (int u = 0; u < config.n_users; ++u) users[static_cast<std::size_t>(u)] = generate_user(config, cat, u);
  return assemble(std::move(cat), std::move(users));
}

void write_ground_truth(std::ostream& out, const GroundTruth& truth) {
  for (const auto& u : truth.users) {
    nlohmann::ordered_json obj;
    obj["user_id"] = u.user_id;
    obj["user_fields"] = u.fields;
    obj["preference"] = u.preference;
    obj["sessions"] = u.sessions;
    out << obj.dump() << '\n';
  }
  for (const auto& it : truth.items) {
    nlohmann::ordered_json obj;
    obj["item_id"] = it.item_id;
    obj["brand_id"] = it.brand_id;
    obj["attributes"] = it.attributes;
    out << obj.dump() << '\n';
  }
}

}  // namespace dumn
