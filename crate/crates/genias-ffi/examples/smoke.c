/* Minimal C consumer: train on the bundled corpus, generate one patched
 * anomaly, and score it.
 *
 * Build from the repository root:
 *   cargo build -p genias-ffi
 *   gcc crates/genias-ffi/examples/smoke.c \
 *       -Icrates/genias-ffi/include \
 *       target/debug/libgenias_ffi.a -lpthread -lm -ldl -o smoke
 *   ./smoke
 */
#include <stdio.h>
#include <math.h>
#include <genias.h>

#define WINDOW_LEN 64

static const char *CONFIG =
    "window_len = 64\n"
    "dims = 1\n"
    "latent = 8\n"
    "batch_size = 50\n"
    "learning_rate = 1e-3\n"
    "max_epochs = 20\n"
    "patience = 100\n"
    "[arch]\n"
    "channels = [8, 12]\n"
    "dilations = [1, 2]\n"
    "kernel_size = 3\n"
    "dropout = 0.1\n";

int main(void) {
  GeniasModel *model = NULL;
  GeniasStatus status =
      genias_train_csv("corpora/sine_train.csv", CONFIG, 3, &model);
  if (status != GENIAS_STATUS_OK) {
    fprintf(stderr, "train failed: %s\n", genias_last_error_message());
    return 1;
  }

  uint32_t t, d, l;
  genias_model_dims(model, &t, &d, &l);
  printf("model: window_len=%u dims=%u latent=%u\n", t, d, l);

  double window[WINDOW_LEN];
  for (int i = 0; i < WINDOW_LEN; i++) {
    window[i] = 0.5 + 0.3 * sin(0.4 * i);
  }
  double patched[WINDOW_LEN];
  uint8_t mask[WINDOW_LEN];
  status = genias_generate_patched(model, window, WINDOW_LEN, 0.2, 11, patched,
                                   mask);
  if (status != GENIAS_STATUS_OK) {
    fprintf(stderr, "generate failed: %s\n", genias_last_error_message());
    genias_model_free(model);
    return 1;
  }
  int replaced = 0;
  for (int i = 0; i < WINDOW_LEN; i++) {
    replaced += mask[i];
  }
  double score_orig, score_patched;
  genias_recon_score(model, window, WINDOW_LEN, &score_orig);
  genias_recon_score(model, patched, WINDOW_LEN, &score_patched);
  printf("patched %d/%d cells; recon score %.5f -> %.5f\n", replaced,
         WINDOW_LEN, score_orig, score_patched);

  genias_model_free(model);
  return 0;
}
