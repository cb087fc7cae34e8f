/*
 * Non-CI companion fixture: the classic vulnerable program the synthetic
 * test binary mirrors.  The test suite never compiles or runs this; it is
 * here so the toolkit can also be exercised against a real build:
 *
 *     gcc -m32 -fno-stack-protector -no-pie -o vuln vuln.c
 *
 * (requires a 32-bit toolchain; disable ASLR in the environment if you want
 * stable addresses, e.g. via setarch -R).
 */
#include <stdio.h>

char str[20] = "MyROPExploit";

void SecretFunctionWithoutParm(void) {
    printf("Welcome to the secret function without parameters\n");
}

void SecretFunctionWithParm(char argv[]) {
    printf("Welcome to another secret function: %s\n", argv);
}

void echo(void) {
    char buffer[20];
    printf("Enter some text:\n");
    scanf("%s", buffer);
    printf("You entered: %s\n", buffer);
}

int main(void) {
    echo();
    return 0;
}
