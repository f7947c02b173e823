/* Exercises the C API from plain C. argv[1] is a scratch directory. */
#include <math.h>
#include <stdio.h>
#include <string.h>

#include "oncobench/oncobench.h"

static int failures = 0;

#define EXPECT(cond)                                              \
  do {                                                            \
    if (!(cond)) {                                                \
      fprintf(stderr, "%s:%d: expected %s\n", __FILE__, __LINE__, #cond); \
      failures++;                                                 \
    }                                                             \
  } while (0)

int main(int argc, char** argv) {
  if (argc < 2) {
    fprintf(stderr, "usage: test_capi WORKDIR\n");
    return 2;
  }
  const char* work = argv[1];
  char overrides[2048];
  snprintf(overrides, sizeof overrides,
           "{\"seed\": 3, \"dataset\": {\"synthetic\": 12},"
           " \"paths\": {\"datasets\": \"%s/data\", \"runs\": \"%s/runs\", \"cache\": \"%s/cache\"},"
           " \"backend\": {\"kind\": \"echo\", \"echo_text\": \"Not relevant\"},"
           " \"run_id\": \"capi\", \"overwrite\": true}",
           work, work, work);

  EXPECT(strlen(ob_version()) > 0);

  int em = -1;
  EXPECT(ob_exact_match("Left", "left", 0, &em) == OB_OK && em == 1);
  EXPECT(ob_exact_match("PR, ER", "ER, PR", 1, &em) == OB_OK && em == 1);
  double b = -1, p = -1, r = -1, f = -1, avg = -1;
  EXPECT(ob_bleu2("left breast", "left breast", &b) == OB_OK && fabs(b - 1.0) < 1e-12);
  EXPECT(ob_rouge_l("the left breast mass", "left breast", &p, &r, &f) == OB_OK);
  EXPECT(fabs(p - 0.5) < 1e-12 && fabs(r - 1.0) < 1e-12);
  EXPECT(ob_average_f1(83.50, 86.60, 90.34, &avg) == OB_OK && fabs(avg - 86.8133333) < 1e-6);
  EXPECT(ob_bleu2(NULL, "x", &b) == OB_ERR_VALIDATION);
  EXPECT(strlen(ob_last_error()) > 0);

  ob_session* bad = NULL;
  EXPECT(ob_session_create(NULL, "{\"task\": \"nope\"}", &bad) == OB_ERR_VALIDATION);
  EXPECT(bad == NULL);
  EXPECT(ob_session_create(NULL, "{not json", &bad) == OB_ERR_VALIDATION);
  EXPECT(ob_session_create("/nonexistent/oncobench.json", NULL, &bad) == OB_ERR_IO);

  ob_session* s = NULL;
  EXPECT(ob_session_create(NULL, overrides, &s) == OB_OK);
  if (s == NULL) return 1;

  char* summary = NULL;
  EXPECT(ob_build_dataset(s, &summary) == OB_OK);
  EXPECT(summary != NULL && strstr(summary, "\"counts\"") != NULL);
  ob_string_free(summary);

  char path[1024];
  snprintf(path, sizeof path, "%s/data/phenotype_qa/test.jsonl", work);
  ob_dataset* ds = NULL;
  EXPECT(ob_dataset_read(path, &ds) == OB_OK);
  EXPECT(ob_dataset_size(ds) > 0);
  char* line = NULL;
  EXPECT(ob_dataset_instance_json(ds, 0, &line) == OB_OK);
  EXPECT(line != NULL && strncmp(line, "{\"id\":", 6) == 0);
  ob_string_free(line);
  EXPECT(ob_dataset_instance_json(ds, ob_dataset_size(ds), &line) == OB_ERR_VALIDATION);
  ob_dataset_free(ds);
  EXPECT(ob_dataset_read("/nonexistent/x.jsonl", &ds) == OB_ERR_IO);

  summary = NULL;
  EXPECT(ob_run(s, &summary) == OB_OK);
  EXPECT(summary != NULL && strstr(summary, "\"average_f1\"") != NULL);
  ob_string_free(summary);

  EXPECT(ob_report(s, "main", "csv", NULL, NULL) == OB_OK);
  EXPECT(ob_report(s, "pie", "csv", NULL, NULL) == OB_ERR_VALIDATION);
  EXPECT(ob_perturb(s, NULL, NULL, NULL) == OB_ERR_VALIDATION); /* kind is none */
  ob_session_destroy(s);

  if (failures) {
    fprintf(stderr, "%d failure(s)\n", failures);
    return 1;
  }
  printf("capi ok\n");
  return 0;
}
