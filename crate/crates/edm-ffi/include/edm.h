/* C API for the edm decision-modelling library.
 *
 * All functions return an int status code (EDM_OK on success) and report
 * results through out-parameters. Handles are opaque; release them with the
 * matching *_free function. Error messages are stored per thread and can be
 * copied out with edm_last_error_message.
 */
#ifndef EDM_H
#define EDM_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes. */
#define EDM_OK 0           /* success */
#define EDM_ERR_ARGUMENT 1 /* null pointer, bad arity, invalid UTF-8 */
#define EDM_ERR_PARSE 2    /* ladder or network text failed to parse/validate */
#define EDM_ERR_NUMERIC 3  /* non-finite value or numeric failure */

/* Opaque handles. */
typedef struct EdmLadder EdmLadder;
typedef struct EdmNetwork EdmNetwork;

/* Copy the calling thread's last error message into buf (NUL-terminated,
 * truncated to len bytes). Returns the untruncated message length. buf may
 * be NULL to query the length only. */
size_t edm_last_error_message(char *buf, size_t len);

/* ---- Decision ladders ------------------------------------------------- */

/* Parse ladder DSL text (NUL-terminated UTF-8) into a new handle. */
int edm_ladder_parse(const char *text, EdmLadder **out);

/* Release a ladder handle. NULL is a no-op. */
void edm_ladder_free(EdmLadder *ladder);

/* Number of declared input variables (0 if ladder is NULL). */
size_t edm_ladder_num_variables(const EdmLadder *ladder);

/* Number of classes the ladder can assign (0 if ladder is NULL). */
size_t edm_ladder_num_classes(const EdmLadder *ladder);

/* Copy the name of the variable at `index` (declaration order) into buf.
 * Returns the name's full length, or 0 if the index is out of range. */
size_t edm_ladder_variable_name(const EdmLadder *ladder, size_t index,
                                char *buf, size_t len);

/* Classify one record. `values` holds one value per ladder variable in
 * declaration order; the 1-based class index is written to out_class. */
int edm_ladder_classify(const EdmLadder *ladder, const double *values,
                        size_t num_values, size_t *out_class);

/* ---- Trained networks -------------------------------------------------- */

/* Parse a serialized network (the pipeline's network.txt format). */
int edm_network_parse(const char *text, EdmNetwork **out);

/* Release a network handle. NULL is a no-op. */
void edm_network_free(EdmNetwork *network);

/* Number of input variables the network expects (0 if network is NULL). */
size_t edm_network_num_inputs(const EdmNetwork *network);

/* Run the network on one record. `values` holds one raw (unnormalized)
 * value per network input, in the network's variable order; the output in
 * (0, 1) is written to out_value. */
int edm_network_forward(const EdmNetwork *network, const double *values,
                        size_t num_values, double *out_value);

/* Round a class-units value (1-based) to the nearest class in
 * 1..num_classes; ties round up. */
int edm_round_to_class(double class_units, size_t num_classes,
                       size_t *out_class);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* EDM_H */
