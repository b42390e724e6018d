"""Build cloze queries from relation templates.

A relation is written as a natural-language template with [SUB] and [OBJ]
placeholders. For each candidate (entity, context) pair we splice the entity
into the subject slot, append the filled template to the context, and mask
the object slot for the language model to predict.
"""
from clozefill import build_query, fill_object, parse_template, substitute_subject, tokenize
from clozefill.model import EntityContextPair

template = parse_template("[SUB] was drafted by [OBJ]")
print("template tokens:   ", template.tokens)
print("subject slot index:", template.subject_index)
print("object slot index: ", template.object_index)

# multi-token entities are spliced in whole; the object slot shifts right
filled = substitute_subject(template, ("Stephen", "Curry"))
print("\nfilled template:   ", filled.tokens)
print("object slot is now:", filled.object_index)

# tokenize handles punctuation: trailing '.' becomes its own token
context = tokenize("The Warriors drafted Steph Curry.")
pair = EntityContextPair(relation_id="drafted_by", entity=("Stephen", "Curry"), context=context)

query = build_query(pair, template, mask_token="[MASK]")
print("\nfull cloze query:  ", " ".join(query.tokens))
print("context length:    ", query.context_len)
print("masked position:   ", query.mask_index)

# substituting a candidate answer into the masked slot, as the anchor step does
print("\nwith a candidate:  ", " ".join(fill_object(query, "Warriors")))
