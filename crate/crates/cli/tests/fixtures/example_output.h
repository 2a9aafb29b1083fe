#ifndef EXAMPLE_OUTPUT_H
#define EXAMPLE_OUTPUT_H

typedef struct myTypeImpl {
    char *buf;
} myType;

void myTypeFree(myType *t);

//@fuzztest Output(out)
//Cleanup(out != NULL, myTypeFree, out)
void maybe_allocate_memory_to_output(int this_much, myType * out);

#endif
