/* Exercises the shared library through its C header only. */
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "polarseg/polarseg.h"

static int failures = 0;

#define EXPECT(cond)                                            \
  do {                                                          \
    if (!(cond)) {                                              \
      fprintf(stderr, "%s:%d: expected %s\n", __FILE__, __LINE__, #cond); \
      ++failures;                                               \
    }                                                           \
  } while (0)

static size_t count_lines(const char* s) {
  size_t n = 0;
  for (; *s; ++s) n += *s == '\n';
  return n;
}

int main(void) {
  psg_config* cfg = NULL;
  EXPECT(psg_config_new(&cfg) == PSG_OK);

  EXPECT(psg_config_set(cfg, "model.fpn_chanels", "8") == PSG_ERR_CONFIG_INVALID);
  EXPECT(strstr(psg_last_error(), "fpn_chanels") != NULL);
  EXPECT(psg_config_set(cfg, "model.fpn_channels", "8") == PSG_OK);
  EXPECT(strcmp(psg_last_error(), "") == 0);
  EXPECT(psg_config_set(cfg, "model.head_convs", "1") == PSG_OK);
  EXPECT(psg_config_set(cfg, "eval.score_threshold", "0.001") == PSG_OK);
  EXPECT(psg_config_set(cfg, "eval.max_detections", "5") == PSG_OK);
  EXPECT(psg_config_ablate(cfg, "no-such-switch") == PSG_ERR_CONFIG_INVALID);
  EXPECT(psg_config_set(NULL, "a", "b") == PSG_ERR_INVALID_ARGUMENT);

  char* value = NULL;
  EXPECT(psg_config_get(cfg, "model.fpn_channels", &value) == PSG_OK);
  EXPECT(value && strcmp(value, "8") == 0);
  psg_string_free(value);

  char* ini = NULL;
  psg_config* back = NULL;
  EXPECT(psg_config_to_ini(cfg, &ini) == PSG_OK);
  EXPECT(psg_config_parse(ini, &back) == PSG_OK);
  char* ini2 = NULL;
  EXPECT(psg_config_to_ini(back, &ini2) == PSG_OK);
  EXPECT(ini && ini2 && strcmp(ini, ini2) == 0);
  psg_string_free(ini);
  psg_string_free(ini2);
  psg_config_free(back);

  char* manifest = NULL;
  EXPECT(psg_count(cfg, &manifest) == PSG_OK);
  EXPECT(manifest && strstr(manifest, "\"macs_inference\"") != NULL);
  psg_string_free(manifest);

  psg_model* model = NULL;
  EXPECT(psg_model_load(cfg, "/nonexistent/model.ckpt", &model) == PSG_ERR_IO);
  EXPECT(psg_model_load(cfg, NULL, &model) == PSG_OK);
  size_t params = 0;
  EXPECT(psg_model_param_count(model, &params) == PSG_OK);
  EXPECT(params > 0);

  const size_t h = 64, w = 64;
  double* rgb = malloc(3 * h * w * sizeof *rgb);
  for (size_t i = 0; i < 3 * h * w; ++i) rgb[i] = (double)((i * 37) % 101) / 100.0;
  char* dets = NULL;
  EXPECT(psg_model_detect(model, rgb, h, w, &dets) == PSG_OK);
  EXPECT(dets != NULL);
  if (dets) {
    EXPECT(count_lines(dets) > 0 && count_lines(dets) <= 5);
    EXPECT(strstr(dets, "\"radii\"") != NULL);
  }
  char* again = NULL;
  EXPECT(psg_model_detect(model, rgb, h, w, &again) == PSG_OK);
  EXPECT(dets && again && strcmp(dets, again) == 0);
  psg_string_free(dets);
  psg_string_free(again);
  EXPECT(psg_model_detect(model, NULL, h, w, &dets) == PSG_ERR_INVALID_ARGUMENT);
  EXPECT(psg_model_detect(model, rgb, 60, 60, &dets) != PSG_OK);
  free(rgb);

  psg_model_free(model);
  psg_config_free(cfg);
  psg_config_free(NULL);
  psg_model_free(NULL);
  psg_string_free(NULL);

  printf("%d failure(s)\n", failures);
  return failures ? 1 : 0;
}
